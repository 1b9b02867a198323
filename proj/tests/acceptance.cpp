// Acceptance suite: one test case per criterion, each printing a single
// machine-grepable PASS/FAIL line. Run the whole binary for the full list or
// filter with --test-case=cNN*.

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "test_support.hpp"

using namespace ebm;
namespace ts = test_support;

namespace {

void verdict(int criterion, const char* name, bool ok, const std::string& detail) {
    std::printf("[%s] criterion %02d: %s (%s)\n", ok ? "PASS" : "FAIL", criterion, name,
                detail.c_str());
    std::fflush(stdout);
    CHECK_MESSAGE(ok, name << ": " << detail);
}

std::string fmt(const char* pattern, double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), pattern, value);
    return buf;
}

Dataset two_pattern_fixture() {
    Dataset data;
    data.dim = 3;
    data.family = UnitFamily::Binary;
    for (int i = 0; i < 8; ++i) {
        data.rows.push_back({1, 1, 0});
        data.rows.push_back({0, 0, 1});
    }
    return data;
}

} // namespace

TEST_CASE("c01: conditional factorization matches enumeration") {
    RngStream rng(9001, 0);
    double max_dev = 0.0;
    for (int model = 0; model < 100; ++model) {
        const std::size_t d = 1 + rng.uniform_below(9);
        const std::size_t p = 1 + rng.uniform_below(10 - d);
        const RbmParams params = ts::random_rbm(d, p, 1.5, rng);

        const std::uint64_t nv = std::uint64_t{1} << d;
        const std::uint64_t nh = std::uint64_t{1} << p;

        // Hidden given visible: product of per-unit logistic terms vs the
        // joint-normalized table.
        for (std::uint64_t vm = 0; vm < nv; ++vm) {
            const Vector v = bits_to_vector(vm, d);
            const Vector probs = binary_cond_prob(hidden_pre_activation(params, v));
            double norm = 0.0;
            Vector table(nh);
            for (std::uint64_t hm = 0; hm < nh; ++hm) {
                table[hm] = std::exp(-energy(params, v, bits_to_vector(hm, p)));
                norm += table[hm];
            }
            for (std::uint64_t hm = 0; hm < nh; ++hm) {
                double prod = 1.0;
                for (std::size_t j = 0; j < p; ++j)
                    prod *= ((hm >> j) & 1u) ? probs[j] : 1.0 - probs[j];
                max_dev = std::max(max_dev, std::abs(prod - table[hm] / norm));
            }
        }
        // Visible given hidden, symmetrically.
        for (std::uint64_t hm = 0; hm < nh; ++hm) {
            const Vector h = bits_to_vector(hm, p);
            const Vector probs = binary_cond_prob(visible_pre_activation(params, h));
            double norm = 0.0;
            Vector table(nv);
            for (std::uint64_t vm = 0; vm < nv; ++vm) {
                table[vm] = std::exp(-energy(params, bits_to_vector(vm, d), h));
                norm += table[vm];
            }
            for (std::uint64_t vm = 0; vm < nv; ++vm) {
                double prod = 1.0;
                for (std::size_t i = 0; i < d; ++i)
                    prod *= ((vm >> i) & 1u) ? probs[i] : 1.0 - probs[i];
                max_dev = std::max(max_dev, std::abs(prod - table[vm] / norm));
            }
        }
    }
    verdict(1, "conditional factorization matches enumeration", max_dev < 1e-10,
            fmt("max deviation %.2e, tolerance 1e-10", max_dev));
}

TEST_CASE("c02: exact gradient matches central finite differences") {
    RngStream rng(9002, 0);
    const double eps = 1e-5;
    double max_dev = 0.0;
    for (int model = 0; model < 20; ++model) {
        RbmParams p = ts::random_rbm(3, 2, 1.0, rng);
        const Dataset data = ts::random_binary_dataset(6, 3, rng);
        const LoglikGradients g = exact_loglik_grad(p, data);
        auto probe = [&](double& slot, double analytic) {
            const double saved = slot;
            slot = saved + eps;
            const double plus = exact_loglik(p, data);
            slot = saved - eps;
            const double minus = exact_loglik(p, data);
            slot = saved;
            max_dev = std::max(max_dev, std::abs((plus - minus) / (2.0 * eps) - analytic));
        };
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 2; ++j) probe(p.weights(i, j), g.weights(i, j));
        for (std::size_t i = 0; i < 3; ++i) probe(p.visible_bias[i], g.visible_bias[i]);
        for (std::size_t j = 0; j < 2; ++j) probe(p.hidden_bias[j], g.hidden_bias[j]);
    }
    verdict(2, "exact gradient matches finite differences", max_dev < 1e-6,
            fmt("max entry deviation %.2e, tolerance 1e-6", max_dev));
}

TEST_CASE("c03: contrastive gradient converges toward the exact gradient in k") {
    RngStream fixture_rng(9003, 0);
    const RbmParams params = ts::random_rbm(3, 2, 0.8, fixture_rng);
    const Dataset support = ts::full_support_dataset(3);
    std::vector<Vector> batch;
    for (int rep = 0; rep < 128; ++rep)
        for (const Vector& v : support.rows) batch.push_back(v);

    const LoglikGradients exact = exact_loglik_grad(params, support);
    Vector exact_flat =
        ts::flatten_gradients(exact.weights, exact.visible_bias, exact.hidden_bias);
    for (double& x : exact_flat) x /= static_cast<double>(support.size());

    const std::size_t ks[] = {1, 10, 100, 500};
    double means[4] = {0, 0, 0, 0};
    const PhaseStats pos = positive_stats(params, batch);
    for (int seed = 0; seed < 10; ++seed) {
        for (int ki = 0; ki < 4; ++ki) {
            const PhaseStats neg =
                negative_stats(params, batch, ks[ki], RngStream(9100 + seed, ki));
            const GradientSet g = cd_gradients(pos, neg, batch.size());
            means[ki] += ts::cosine_similarity(
                ts::flatten_gradients(g.weights, g.visible_bias, g.hidden_bias), exact_flat);
        }
    }
    for (double& m : means) m /= 10.0;

    bool trend_ok = true;
    for (int ki = 0; ki + 1 < 4; ++ki)
        if (means[ki + 1] < means[ki] - 5e-3) trend_ok = false;
    const bool ok = means[3] > 0.95 && trend_ok;
    std::ostringstream detail;
    detail << "mean cosine over seeds:";
    for (int ki = 0; ki < 4; ++ki) detail << " k=" << ks[ki] << ":" << means[ki];
    verdict(3, "contrastive gradient aligns with the exact gradient", ok, detail.str());
}

TEST_CASE("c04: long chains reach the enumerated stationary joint") {
    RngStream model_rng(9004, 0);
    double max_tv = 0.0;
    for (int model = 0; model < 5; ++model) {
        const std::size_t d = 2 + model_rng.uniform_below(5);
        const std::size_t p = 1 + model_rng.uniform_below(std::min<std::size_t>(8 - d, 4));
        const RbmParams params = ts::random_rbm(d, p, 0.9, model_rng);
        const Vector joint = exact_joint_table(params);

        RngStream rng(9200 + model, 0);
        Vector v = random_visible_init(params, rng);
        for (int s = 0; s < 2000; ++s) v = gibbs_sweep_rbm(params, v, rng).second;

        const std::uint64_t nh = std::uint64_t{1} << p;
        Vector counts(joint.size(), 0.0);
        const int sweeps = 200000;
        for (int s = 0; s < sweeps; ++s) {
            auto [h, v_next] = gibbs_sweep_rbm(params, v, rng);
            counts[ts::vector_to_mask(v) * nh + ts::vector_to_mask(h)] += 1.0;
            v = v_next;
        }
        for (double& c : counts) c /= sweeps;
        max_tv = std::max(max_tv, ts::total_variation(counts, joint));
    }
    verdict(4, "chain stationarity against enumeration", max_tv < 0.05,
            fmt("max TV distance %.3f, tolerance 0.05", max_tv));
}

TEST_CASE("c05: training strictly improves the exact log-likelihood on all seeds") {
    const Dataset data = two_pattern_fixture();
    int improved = 0;
    double min_gain = 1e300;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        TrainConfig cfg;
        cfg.learning_rate = 0.1;
        cfg.cd_steps = 1;
        cfg.max_epochs = 500;
        cfg.seed = seed;
        cfg.init_scale = 0.01;
        RngStream init_rng(cfg.seed, stream_tag::init);
        const RbmParams init =
            init_params(3, 2, UnitFamily::Binary, UnitFamily::Binary, cfg.init_scale, init_rng);
        const double before = exact_loglik(init, data);
        auto [trained, report] = train_rbm(init, cfg, data);
        const double after = exact_loglik(trained, data);
        if (after > before) ++improved;
        min_gain = std::min(min_gain, after - before);
    }
    verdict(5, "training improves the exact log-likelihood", improved == 5,
            fmt("5 seeds, minimum gain %.3f nats", min_gain));
}

TEST_CASE("c06: thermodynamic identity holds across temperatures") {
    RngStream rng(9006, 0);
    double max_dev = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        Vector energies(8);
        for (double& e : energies) e = 10.0 * rng.uniform() - 5.0;
        for (double beta : {0.1, 1.0, 10.0}) {
            const ThermoReport t = boltzmann_quantities(energies, beta);
            const double rhs = -beta * *t.free_energy + beta * t.internal_energy;
            max_dev = std::max(max_dev, std::abs(t.entropy - rhs));
        }
    }
    verdict(6, "entropy identity", max_dev < 1e-10,
            fmt("max deviation %.2e, tolerance 1e-10", max_dev));
}

TEST_CASE("c07: energy descent and convergence of associative recall") {
    RngStream rng(9007, 0);
    bool descent_ok = true;
    bool converged_ok = true;
    double worst_rise = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        HopfieldNet net;
        net.units = 2 + rng.uniform_below(9);
        net.weights = ts::random_symmetric_hollow(net.units, 2.0, rng);
        Vector state(net.units);
        for (double& x : state) x = rng.uniform() < 0.5 ? -1.0 : 1.0;

        double e = hopfield_energy(net, state);
        bool settled = false;
        const std::size_t max_sweeps = net.units * (std::size_t{1} << net.units);
        for (std::size_t sweep = 0; sweep < max_sweeps && !settled; ++sweep) {
            bool changed = false;
            for (std::size_t i = 0; i < net.units; ++i) {
                const Vector next = update_unit(net, state, i);
                const double e_next = hopfield_energy(net, next);
                worst_rise = std::max(worst_rise, e_next - e);
                if (e_next > e + 1e-12) descent_ok = false;
                if (next[i] != state[i]) changed = true;
                state = next;
                e = e_next;
            }
            settled = !changed;
        }
        if (!settled || !is_fixed_point(net, state)) converged_ok = false;
    }
    verdict(7, "associative memory descends in energy and settles",
            descent_ok && converged_ok,
            fmt("1000 networks, worst energy rise %.2e", worst_rise));
}

TEST_CASE("c08: autoregressive model reduces to the static one and its link gradient is exact") {
    // Bitwise reduction with zero links.
    RngStream rng(9008, 0);
    const RbmParams rbm = ts::random_rbm(3, 2, 1.0, rng);
    CrbmParams crbm;
    crbm.rbm = rbm;
    crbm.history_length = 1;
    crbm.past_to_visible.assign(1, Matrix(3, 3));
    crbm.past_to_hidden.assign(1, Matrix(3, 2));

    bool bitwise_ok = true;
    {
        std::vector<SequenceWindow> windows;
        std::vector<Vector> targets;
        for (int r = 0; r < 8; ++r) {
            SequenceWindow w;
            w.history = {ts::random_binary_vector(3, rng)};
            w.target = ts::random_binary_vector(3, rng);
            targets.push_back(w.target);
            windows.push_back(std::move(w));
        }
        const RngStream base(9300, 0);
        const CrbmGradients cg = crbm_gradients(crbm, windows, 5, base);
        const GradientSet g = cd_gradients(positive_stats(rbm, targets),
                                           negative_stats(rbm, targets, 5, base),
                                           targets.size());
        bitwise_ok = cg.core.weights == g.weights &&
                     cg.core.visible_bias == g.visible_bias &&
                     cg.core.hidden_bias == g.hidden_bias;

        RngStream roll_a(9301, 0), roll_b(9301, 0);
        const auto frames = generate_sequence(crbm, {targets[0]}, 10, 3, roll_a);
        Vector frame = targets[0];
        for (std::size_t s = 0; s < frames.size(); ++s) {
            frame = gibbs_chain(rbm, frame, 3, roll_b).visible;
            if (frames[s] != frame) bitwise_ok = false;
        }
    }

    // Link gradient against the enumerated effective-bias gradient.
    RngStream fix_rng(9302, 0);
    CrbmParams tiny;
    tiny.rbm = ts::random_rbm(2, 2, 0.5, fix_rng);
    tiny.history_length = 1;
    tiny.past_to_visible.assign(1, Matrix(2, 2));
    tiny.past_to_hidden.assign(1, Matrix(2, 2));
    for (double& x : tiny.past_to_visible[0].data()) x = 0.5 * (2.0 * fix_rng.uniform() - 1.0);
    for (double& x : tiny.past_to_hidden[0].data()) x = 0.5 * (2.0 * fix_rng.uniform() - 1.0);

    std::vector<SequenceWindow> distinct(2);
    distinct[0].history = {Vector{1, 0}};
    distinct[0].target = Vector{1, 1};
    distinct[1].history = {Vector{1, 1}};
    distinct[1].target = Vector{0, 1};
    std::vector<SequenceWindow> batch;
    for (int rep = 0; rep < 512; ++rep)
        for (const auto& w : distinct) batch.push_back(w);

    Matrix g_ref(2, 2);
    for (const auto& w : distinct) {
        const RbmParams view = conditioned_view(tiny, w.history);
        Dataset single;
        single.dim = 2;
        single.family = UnitFamily::Binary;
        single.rows = {w.target};
        const LoglikGradients exact = exact_loglik_grad(view, single);
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t j = 0; j < 2; ++j)
                g_ref(i, j) += w.history[0][i] * exact.visible_bias[j];
    }
    for (double& x : g_ref.data()) x /= 2.0;

    const CrbmGradients g = crbm_gradients(tiny, batch, 300, RngStream(9303, 0));
    const double dev = ts::max_abs_diff(g.past_to_visible[0], g_ref);

    verdict(8, "autoregressive reduction and link gradient", bitwise_ok && dev < 0.05,
            fmt("bitwise reduction + link-gradient deviation %.3f (tol 0.05)", dev));
}

TEST_CASE("c09: pre-training beats random initialization for the autoencoder") {
    RngStream data_rng(9009, 0);
    const Dataset data = ts::two_cluster_dataset(30, 0.1, data_rng);
    DbnSpec spec;
    spec.layer_sizes = {8, 4, 2};

    std::vector<double> pretrained_mse, random_mse;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        TrainConfig pre_cfg;
        pre_cfg.learning_rate = 0.1;
        pre_cfg.cd_steps = 1;
        pre_cfg.max_epochs = 100;
        pre_cfg.batch_size = 10;
        pre_cfg.seed = seed;
        pre_cfg.init_scale = 0.01;

        TrainConfig ft_cfg;
        ft_cfg.learning_rate = 0.5;
        ft_cfg.max_epochs = 200;
        ft_cfg.batch_size = 10;
        ft_cfg.seed = seed;

        const DbnStack stack = pretrain(spec, data, pre_cfg);
        auto [tuned_pre, rep_pre] = finetune(unroll_autoencoder(stack), data, ft_cfg);
        pretrained_mse.push_back(reconstruction_mse(tuned_pre, data));

        RngStream init_rng(seed, stream_tag::init);
        const DbnStack random_stack = init_stack(spec, data.family, 0.01, init_rng);
        auto [tuned_rand, rep_rand] = finetune(unroll_autoencoder(random_stack), data, ft_cfg);
        random_mse.push_back(reconstruction_mse(tuned_rand, data));
    }
    std::sort(pretrained_mse.begin(), pretrained_mse.end());
    std::sort(random_mse.begin(), random_mse.end());
    const double med_pre = pretrained_mse[2];
    const double med_rand = random_mse[2];
    std::ostringstream detail;
    detail << "median MSE pre-trained " << med_pre << " vs random " << med_rand;
    verdict(9, "pre-trained initialization wins the paired comparison", med_pre < med_rand,
            detail.str());
}

TEST_CASE("c10: backpropagation gradients match finite differences on four-layer nets") {
    RngStream rng(9010, 0);
    const double eps = 1e-5;
    double max_dev = 0.0;
    for (int trial = 0; trial < 3; ++trial) {
        DbnSpec spec;
        spec.layer_sizes = {5, 4, 3};
        Mlp mlp = unroll_autoencoder(init_stack(spec, UnitFamily::Binary, 0.6, rng));
        REQUIRE(mlp.layers.size() == 4);

        std::vector<Vector> batch;
        for (int r = 0; r < 4; ++r) batch.push_back(ts::random_binary_vector(5, rng));
        const MlpGradients grads = mlp_gradients(mlp, batch);

        auto probe = [&](double& slot, double analytic) {
            const double saved = slot;
            slot = saved + eps;
            const double plus = mlp_loss(mlp, batch);
            slot = saved - eps;
            const double minus = mlp_loss(mlp, batch);
            slot = saved;
            max_dev = std::max(max_dev, std::abs((plus - minus) / (2.0 * eps) - analytic));
        };
        for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
            for (std::size_t idx = 0; idx < mlp.layers[l].weight.data().size(); ++idx)
                probe(mlp.layers[l].weight.data()[idx], grads.weights[l].data()[idx]);
            for (std::size_t idx = 0; idx < mlp.layers[l].bias.size(); ++idx)
                probe(mlp.layers[l].bias[idx], grads.biases[l][idx]);
        }
    }
    verdict(10, "backpropagation matches finite differences", max_dev < 1e-6,
            fmt("max entry deviation %.2e, tolerance 1e-6", max_dev));
}

TEST_CASE("c11: every training command reruns bitwise from its manifest") {
    const std::string cli = EBM_CLI_PATH;
    char tmpl[] = "/tmp/ebm_accept_XXXXXX";
    const std::string dir = mkdtemp(tmpl);

    auto shell = [&](const std::string& args) {
        const std::string cmd = cli + " " + args + " >/dev/null 2>&1";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    };
    auto slurp = [](const std::string& path) {
        std::ifstream in(path);
        std::ostringstream buf;
        buf << in.rdbuf();
        return buf.str();
    };

    {
        std::ofstream out(dir + "/data.csv");
        out << "v0,v1,v2\n";
        for (int i = 0; i < 8; ++i) out << "1,1,0\n0,0,1\n";
    }
    {
        std::ofstream out(dir + "/seq.csv");
        out << "seq_id,x0,x1\n";
        for (int t = 0; t < 20; ++t) out << "s1," << (t % 2) << "," << (1 - t % 2) << "\n";
    }

    struct Step {
        std::string name;
        std::string args;
        std::string out;
    };
    const std::vector<Step> steps = {
        {"train rbm",
         "train --kind rbm --data " + dir + "/data.csv --hidden 2 --epochs 10 --seed 4 --out " +
             dir + "/rbm.json",
         dir + "/rbm.json"},
        {"train bm",
         "train --kind bm --data " + dir + "/data.csv --hidden 2 --epochs 5 --seed 4 --out " +
             dir + "/bm.json",
         dir + "/bm.json"},
        {"train crbm",
         "train --kind crbm --data " + dir + "/seq.csv --hidden 2 --history 2 --epochs 5 "
         "--seed 4 --out " +
             dir + "/crbm.json",
         dir + "/crbm.json"},
        {"pretrain-dbn",
         "pretrain-dbn --data " + dir + "/data.csv --layers 3,2 --epochs 5 --seed 4 --out " +
             dir + "/stack.json",
         dir + "/stack.json"},
        {"finetune-dbn",
         "finetune-dbn --data " + dir + "/data.csv --stack " + dir +
             "/stack.json --epochs 5 --seed 4 --out " + dir + "/mlp.json",
         dir + "/mlp.json"},
    };

    bool all_ok = true;
    std::string failed;
    for (const Step& step : steps) {
        if (shell(step.args) != 0) {
            all_ok = false;
            failed = step.name + " (run failed)";
            break;
        }
        const std::string first = slurp(step.out);
        if (shell("rerun --manifest " + step.out + ".manifest.json") != 0) {
            all_ok = false;
            failed = step.name + " (rerun failed)";
            break;
        }
        if (slurp(step.out) != first) {
            all_ok = false;
            failed = step.name + " (bytes differ)";
            break;
        }
    }
    const std::string cleanup = "rm -rf '" + dir + "'";
    if (std::system(cleanup.c_str()) != 0) {
        // best effort
    }
    verdict(11, "manifest reruns are bitwise reproducible", all_ok,
            all_ok ? "5 training commands round-tripped" : failed);
}
