#include <doctest.h>

#include <cmath>

#include "test_support.hpp"

using namespace ebm;
namespace ts = test_support;

namespace {

// Wrap a two-layer model into the autoregressive form with zero links.
CrbmParams zero_link_crbm(const RbmParams& rbm, std::size_t history_length) {
    CrbmParams p;
    p.rbm = rbm;
    p.history_length = history_length;
    p.past_to_visible.assign(history_length, Matrix(rbm.visible_dim, rbm.visible_dim));
    p.past_to_hidden.assign(history_length, Matrix(rbm.visible_dim, rbm.hidden_dim));
    return p;
}

CrbmParams random_crbm(std::size_t d, std::size_t p, std::size_t T, double scale,
                       RngStream& rng) {
    CrbmParams out = zero_link_crbm(ts::random_rbm(d, p, scale, rng), T);
    for (Matrix& m : out.past_to_visible)
        for (double& x : m.data()) x = scale * (2.0 * rng.uniform() - 1.0);
    for (Matrix& m : out.past_to_hidden)
        for (double& x : m.data()) x = scale * (2.0 * rng.uniform() - 1.0);
    return out;
}

} // namespace

TEST_CASE("zero links reduce the effective biases to the static ones") {
    RngStream rng(400, 0);
    const CrbmParams p = zero_link_crbm(ts::random_rbm(3, 2, 1.0, rng), 2);
    const History history = {ts::random_binary_vector(3, rng), ts::random_binary_vector(3, rng)};
    const auto [vis, hid] = effective_biases(p, history);
    CHECK(vis == p.rbm.visible_bias);
    CHECK(hid == p.rbm.hidden_bias);
}

TEST_CASE("identity-like history links select the active past unit") {
    CrbmParams p = zero_link_crbm(
        [] {
            RbmParams r;
            r.visible_dim = 3;
            r.hidden_dim = 2;
            r.weights = Matrix(3, 2);
            r.visible_bias.assign(3, 0.0);
            r.hidden_bias.assign(2, 0.0);
            return r;
        }(),
        1);
    for (std::size_t i = 0; i < 3; ++i) p.past_to_visible[0](i, i) = 1.0;
    const History history = {Vector{1, 0, 0}};
    const auto [vis, hid] = effective_biases(p, history);
    CHECK(vis == Vector{1, 0, 0});
    CHECK(hid == Vector{0, 0});
}

TEST_CASE("effective biases match a scalar-loop reference") {
    RngStream rng(401, 0);
    for (int trial = 0; trial < 20; ++trial) {
        const CrbmParams p = random_crbm(3, 2, 2, 1.0, rng);
        const History history = {ts::random_binary_vector(3, rng),
                                 ts::random_binary_vector(3, rng)};
        const auto [vis, hid] = effective_biases(p, history);

        Vector vis_ref = p.rbm.visible_bias;
        Vector hid_ref = p.rbm.hidden_bias;
        for (std::size_t tau = 0; tau < 2; ++tau) {
            for (std::size_t j = 0; j < 3; ++j)
                for (std::size_t i = 0; i < 3; ++i)
                    vis_ref[j] += p.past_to_visible[tau](i, j) * history[tau][i];
            for (std::size_t j = 0; j < 2; ++j)
                for (std::size_t i = 0; i < 3; ++i)
                    hid_ref[j] += p.past_to_hidden[tau](i, j) * history[tau][i];
        }
        CHECK(ts::max_abs_diff(vis, vis_ref) < 1e-12);
        CHECK(ts::max_abs_diff(hid, hid_ref) < 1e-12);
    }
}

TEST_CASE("history length mismatch raises") {
    RngStream rng(402, 0);
    const CrbmParams p = zero_link_crbm(ts::random_rbm(3, 2, 1.0, rng), 2);
    CHECK_THROWS_AS(effective_biases(p, History{Vector{1, 0, 0}}), DimensionError);
}

TEST_CASE("zero-link gradients are bitwise equal to the plain trainer path") {
    RngStream rng(403, 0);
    const RbmParams rbm = ts::random_rbm(3, 2, 1.0, rng);
    const CrbmParams crbm = zero_link_crbm(rbm, 1);

    std::vector<SequenceWindow> windows;
    std::vector<Vector> targets;
    for (int r = 0; r < 6; ++r) {
        SequenceWindow w;
        w.history = {ts::random_binary_vector(3, rng)};
        w.target = ts::random_binary_vector(3, rng);
        targets.push_back(w.target);
        windows.push_back(std::move(w));
    }

    const RngStream base(404, 5);
    const CrbmGradients cg = crbm_gradients(crbm, windows, 3, base);

    const PhaseStats pos = positive_stats(rbm, targets);
    const PhaseStats neg = negative_stats(rbm, targets, 3, base);
    const GradientSet g = cd_gradients(pos, neg, targets.size());

    CHECK(cg.core.weights == g.weights);
    CHECK(cg.core.visible_bias == g.visible_bias);
    CHECK(cg.core.hidden_bias == g.hidden_bias);
}

TEST_CASE("an all-zero history wipes the link gradients") {
    RngStream rng(405, 0);
    const CrbmParams p = random_crbm(3, 2, 1, 0.8, rng);
    std::vector<SequenceWindow> windows;
    for (int r = 0; r < 4; ++r) {
        SequenceWindow w;
        w.history = {Vector(3, 0.0)};
        w.target = ts::random_binary_vector(3, rng);
        windows.push_back(std::move(w));
    }
    const CrbmGradients g = crbm_gradients(p, windows, 2, RngStream(406, 0));
    CHECK(squared_norm(g.past_to_visible[0]) == 0.0);
    CHECK(squared_norm(g.past_to_hidden[0]) == 0.0);
}

TEST_CASE("saturated machines reproduce their data and zero the gradients") {
    CrbmParams p = zero_link_crbm(
        [] {
            RbmParams r;
            r.visible_dim = 2;
            r.hidden_dim = 2;
            r.weights = Matrix(2, 2);
            r.visible_bias.assign(2, 40.0);
            r.hidden_bias.assign(2, 40.0);
            return r;
        }(),
        1);
    std::vector<SequenceWindow> windows(3);
    for (auto& w : windows) {
        w.history = {Vector{1, 1}};
        w.target = Vector{1, 1};
    }
    const CrbmGradients g = crbm_gradients(p, windows, 2, RngStream(407, 0));
    CHECK(std::sqrt(squared_norm(g.core.weights)) < 1e-9);
    CHECK(std::sqrt(squared_norm(g.past_to_visible[0])) < 1e-9);
    CHECK(std::sqrt(squared_norm(g.past_to_hidden[0])) < 1e-9);
}

TEST_CASE("link-gradient rows vanish exactly where the past unit is zero") {
    RngStream rng(408, 0);
    const CrbmParams p = random_crbm(3, 2, 2, 0.7, rng);
    for (int trial = 0; trial < 10; ++trial) {
        SequenceWindow w;
        w.history = {ts::random_binary_vector(3, rng), ts::random_binary_vector(3, rng)};
        w.target = ts::random_binary_vector(3, rng);
        const CrbmGradients g =
            crbm_gradients(p, {w}, 2, RngStream(500 + trial, 0));
        for (std::size_t tau = 0; tau < 2; ++tau)
            for (std::size_t i = 0; i < 3; ++i)
                if (w.history[tau][i] == 0.0)
                    for (std::size_t j = 0; j < 3; ++j) {
                        CHECK(g.past_to_visible[tau](i, j) == 0.0);
                        if (j < 2) CHECK(g.past_to_hidden[tau](i, j) == 0.0);
                    }
    }
}

TEST_CASE("link gradients track the enumerated effective-bias gradient") {
    RngStream rng(409, 0);
    const CrbmParams p = random_crbm(2, 2, 1, 0.5, rng);

    std::vector<SequenceWindow> distinct(2);
    distinct[0].history = {Vector{1, 0}};
    distinct[0].target = Vector{1, 1};
    distinct[1].history = {Vector{1, 1}};
    distinct[1].target = Vector{0, 1};

    std::vector<SequenceWindow> batch;
    for (int rep = 0; rep < 512; ++rep)
        for (const auto& w : distinct) batch.push_back(w);

    // Enumerated reference: per window, the gradient of the conditioned view's
    // likelihood; the link rows scale its bias gradients by the past values.
    Matrix g_ref(2, 2);
    Matrix q_ref(2, 2);
    for (const auto& w : distinct) {
        const RbmParams view = conditioned_view(p, w.history);
        Dataset single;
        single.dim = 2;
        single.family = UnitFamily::Binary;
        single.rows = {w.target};
        const LoglikGradients exact = exact_loglik_grad(view, single);
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t j = 0; j < 2; ++j) {
                g_ref(i, j) += w.history[0][i] * exact.visible_bias[j];
                q_ref(i, j) += w.history[0][i] * exact.hidden_bias[j];
            }
    }
    for (double& x : g_ref.data()) x /= 2.0;
    for (double& x : q_ref.data()) x /= 2.0;

    const CrbmGradients g = crbm_gradients(p, batch, 300, RngStream(410, 0));
    CHECK(ts::max_abs_diff(g.past_to_visible[0], g_ref) < 0.05);
    CHECK(ts::max_abs_diff(g.past_to_hidden[0], q_ref) < 0.05);
}

TEST_CASE("sequence training with zero learning rate changes nothing") {
    RngStream rng(411, 0);
    const CrbmParams init = random_crbm(3, 2, 1, 0.4, rng);
    std::vector<SequenceWindow> windows(4);
    for (auto& w : windows) {
        w.history = {ts::random_binary_vector(3, rng)};
        w.target = ts::random_binary_vector(3, rng);
    }
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.max_epochs = 3;
    auto [trained, report] = train_crbm(init, cfg, windows);
    CHECK(trained == init);
}

TEST_CASE("masked link training reproduces the plain trainer on the targets") {
    RngStream rng(412, 0);
    const RbmParams rbm_init = ts::random_rbm(3, 2, 0.3, rng);
    const CrbmParams crbm_init = zero_link_crbm(rbm_init, 1);

    std::vector<SequenceWindow> windows(8);
    Dataset targets;
    targets.dim = 3;
    targets.family = UnitFamily::Binary;
    for (auto& w : windows) {
        w.history = {ts::random_binary_vector(3, rng)};
        w.target = ts::random_binary_vector(3, rng);
        targets.rows.push_back(w.target);
    }

    TrainConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.max_epochs = 15;
    cfg.cd_steps = 1;
    cfg.seed = 77;
    auto [crbm_trained, crbm_report] =
        train_crbm(crbm_init, cfg, windows, /*link_learning=*/false);
    auto [rbm_trained, rbm_report] = train_rbm(rbm_init, cfg, targets);
    CHECK(crbm_trained.rbm == rbm_trained);
}

TEST_CASE("training on a constant sequence reduces the reconstruction error") {
    SequenceDataset data;
    data.dim = 3;
    data.family = UnitFamily::Binary;
    data.sequences = {std::vector<Vector>(40, Vector{1, 0, 1})};

    TrainConfig cfg;
    cfg.learning_rate = 0.2;
    cfg.max_epochs = 150;
    cfg.cd_steps = 1;
    cfg.seed = 4;
    auto [trained, report] = train_crbm(cfg, data, 2, 1);
    CHECK(report.epochs.back().recon_error < report.epochs.front().recon_error);
}

TEST_CASE("rollout of zero steps is empty") {
    RngStream rng(413, 0);
    const CrbmParams p = random_crbm(3, 2, 1, 0.5, rng);
    RngStream gen(414, 0);
    CHECK(generate_sequence(p, {Vector{1, 0, 1}}, 0, 3, gen).empty());
}

TEST_CASE("rollout outputs stay in the visible domain") {
    RngStream rng(415, 0);
    const CrbmParams p = random_crbm(3, 2, 2, 0.8, rng);
    RngStream gen(416, 0);
    const auto frames =
        generate_sequence(p, {Vector{1, 0, 1}, Vector{0, 0, 1}}, 200, 2, gen);
    CHECK(frames.size() == 200);
    for (const Vector& f : frames)
        for (double x : f) CHECK((x == 0.0 || x == 1.0));
}

TEST_CASE("zero-link rollout equals a persistent chain of the base model") {
    RngStream rng(417, 0);
    const RbmParams rbm = ts::random_rbm(3, 2, 1.0, rng);
    const CrbmParams p = zero_link_crbm(rbm, 1);
    const Vector seed_frame{1, 1, 0};

    RngStream a(418, 0);
    const auto frames = generate_sequence(p, {seed_frame}, 25, 4, a);

    RngStream b(418, 0);
    Vector frame = seed_frame;
    for (std::size_t s = 0; s < 25; ++s) {
        frame = gibbs_chain(rbm, frame, 4, b).visible;
        CHECK(frames[s] == frame);
    }
}

TEST_CASE("zero-link rollout statistics match the enumerated marginal") {
    RngStream rng(419, 0);
    const RbmParams rbm = ts::random_rbm(3, 2, 0.9, rng);
    const CrbmParams p = zero_link_crbm(rbm, 1);
    const Vector marginal = exact_marginal_table(rbm);

    RngStream gen(420, 0);
    const auto frames = generate_sequence(p, {Vector{0, 0, 0}}, 30000, 3, gen);
    Vector counts(8, 0.0);
    for (std::size_t s = 1000; s < frames.size(); ++s)
        counts[ts::vector_to_mask(frames[s])] += 1.0;
    const double total = static_cast<double>(frames.size() - 1000);
    for (double& c : counts) c /= total;
    CHECK(ts::total_variation(counts, marginal) < 0.05);
}

TEST_CASE("window construction slides over every sequence") {
    SequenceDataset data;
    data.dim = 2;
    data.family = UnitFamily::Binary;
    data.sequences = {{Vector{0, 0}, Vector{0, 1}, Vector{1, 0}, Vector{1, 1}},
                      {Vector{1, 1}, Vector{0, 0}},
                      {Vector{1, 0}}};
    const auto windows = build_windows(data, 2);
    // First sequence yields 2 windows, second and third are too short.
    REQUIRE(windows.size() == 2);
    CHECK(windows[0].history[0] == Vector{0, 1}); // t-1
    CHECK(windows[0].history[1] == Vector{0, 0}); // t-2
    CHECK(windows[0].target == Vector{1, 0});
    CHECK(windows[1].target == Vector{1, 1});
}
