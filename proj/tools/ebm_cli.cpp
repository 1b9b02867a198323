// Command-line surface: CSV ingestion, training, sampling, encoding, and
// oracle verification for the energy-based model library.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ebm/ebm.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitCapacity = 3;
constexpr int kExitCheckFailed = 4;

std::string iso_timestamp() {
    const std::time_t now = std::time(nullptr);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

void write_manifest(const std::string& command, const json& args, const std::string& out_path) {
    json manifest;
    manifest["command"] = command;
    manifest["args"] = args;
    manifest["code_version"] = ebm::kVersion;
    manifest["timestamp"] = iso_timestamp();
    const std::string path = out_path + ".manifest.json";
    std::ofstream out(path);
    if (!out) throw ebm::Error("cannot write manifest '" + path + "'");
    out << manifest.dump(2) << '\n';
}

std::vector<std::size_t> parse_layer_list(const std::string& text) {
    std::vector<std::size_t> sizes;
    std::string current;
    for (char ch : text + ",") {
        if (ch == ',') {
            if (current.empty()) throw ebm::ValidationError("--layers: empty entry");
            char* end = nullptr;
            const long v = std::strtol(current.c_str(), &end, 10);
            if (*end != '\0' || v <= 0)
                throw ebm::ValidationError("--layers: '" + current + "' is not a positive integer");
            sizes.push_back(static_cast<std::size_t>(v));
            current.clear();
        } else {
            current.push_back(ch);
        }
    }
    return sizes;
}

struct CommonTrainFlags {
    double lr = 0.1;
    std::size_t batch = 0;
    std::size_t k = 1;
    std::size_t epochs = 100;
    std::uint64_t seed = 0;
    double init_scale = 0.01;
    double tol = 0.0;
    std::size_t threads = 1;
    bool track_loglik = false;

    ebm::TrainConfig to_config() const {
        ebm::TrainConfig cfg;
        cfg.learning_rate = lr;
        cfg.batch_size = batch;
        cfg.cd_steps = k;
        cfg.max_epochs = epochs;
        cfg.seed = seed;
        cfg.init_scale = init_scale;
        cfg.convergence_tol = tol;
        cfg.threads = threads;
        cfg.record_loglik = track_loglik;
        return cfg;
    }

    json to_json() const {
        return {{"lr", lr},       {"batch", batch},           {"k", k},
                {"epochs", epochs}, {"seed", seed},           {"init_scale", init_scale},
                {"tol", tol},     {"threads", threads},       {"track_loglik", track_loglik}};
    }

    static CommonTrainFlags from_json(const json& j) {
        CommonTrainFlags f;
        f.lr = j.at("lr").get<double>();
        f.batch = j.at("batch").get<std::size_t>();
        f.k = j.at("k").get<std::size_t>();
        f.epochs = j.at("epochs").get<std::size_t>();
        f.seed = j.at("seed").get<std::uint64_t>();
        f.init_scale = j.at("init_scale").get<double>();
        f.tol = j.at("tol").get<double>();
        f.threads = j.at("threads").get<std::size_t>();
        f.track_loglik = j.at("track_loglik").get<bool>();
        return f;
    }

    void add_flags(CLI::App* app) {
        app->add_option("--lr", lr, "learning rate");
        app->add_option("--batch", batch, "mini-batch size (0 = full batch)");
        app->add_option("--k", k, "chain sweeps per gradient estimate");
        app->add_option("--epochs", epochs, "training epochs");
        app->add_option("--seed", seed, "random seed");
        app->add_option("--init-scale", init_scale, "weight initialization scale");
        app->add_option("--tol", tol, "early-stop threshold on the update norm");
        app->add_option("--threads", threads, "worker cap (results are thread-count independent)")
            ->envname("EBM_THREADS");
        app->add_flag("--track-loglik", track_loglik,
                      "record exact log-likelihood per epoch (small binary models)");
    }
};

ebm::Standardization compute_standardization(const ebm::Dataset& data) {
    ebm::Standardization s;
    s.mean.assign(data.dim, 0.0);
    s.stddev.assign(data.dim, 1.0);
    if (data.size() == 0) return s;
    for (const ebm::Vector& row : data.rows)
        for (std::size_t c = 0; c < data.dim; ++c) s.mean[c] += row[c];
    for (double& m : s.mean) m /= static_cast<double>(data.size());
    for (std::size_t c = 0; c < data.dim; ++c) {
        double acc = 0.0;
        for (const ebm::Vector& row : data.rows) {
            const double diff = row[c] - s.mean[c];
            acc += diff * diff;
        }
        const double var = acc / static_cast<double>(data.size());
        s.stddev[c] = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    return s;
}

void apply_standardization(const ebm::Standardization& s, ebm::Dataset& data) {
    for (ebm::Vector& row : data.rows)
        for (std::size_t c = 0; c < data.dim; ++c) row[c] = (row[c] - s.mean[c]) / s.stddev[c];
}

ebm::Vector unstandardize(const ebm::Standardization& s, const ebm::Vector& row) {
    ebm::Vector out = row;
    for (std::size_t c = 0; c < out.size() && c < s.mean.size(); ++c)
        out[c] = out[c] * s.stddev[c] + s.mean[c];
    return out;
}

void report_summary(const ebm::TrainReport& report) {
    if (report.epochs.empty()) return;
    const ebm::EpochRecord& first = report.epochs.front();
    const ebm::EpochRecord& last = report.epochs.back();
    std::fprintf(stderr, "trained %zu epochs: recon_error %.6g -> %.6g, grad_norm %.6g -> %.6g\n",
                 report.epochs.size(), first.recon_error, last.recon_error, first.grad_norm,
                 last.grad_norm);
    if (last.loglik)
        std::fprintf(stderr, "exact log-likelihood: %.6g -> %.6g\n",
                     first.loglik.value_or(0.0), *last.loglik);
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainOptions {
    std::string kind = "rbm";
    std::string data;
    std::string out;
    std::string report_path; // default derived from out
    std::string family = "binary";
    std::string hidden_family = "binary";
    std::size_t hidden = 2;
    std::size_t history = 1;
    bool standardize = false;
    CommonTrainFlags flags;

    json to_json() const {
        json j = flags.to_json();
        j["kind"] = kind;
        j["data"] = data;
        j["out"] = out;
        j["report"] = report_path;
        j["family"] = family;
        j["hidden_family"] = hidden_family;
        j["hidden"] = hidden;
        j["history"] = history;
        j["standardize"] = standardize;
        return j;
    }

    static TrainOptions from_json(const json& j) {
        TrainOptions o;
        o.flags = CommonTrainFlags::from_json(j);
        o.kind = j.at("kind").get<std::string>();
        o.data = j.at("data").get<std::string>();
        o.out = j.at("out").get<std::string>();
        o.report_path = j.at("report").get<std::string>();
        o.family = j.at("family").get<std::string>();
        o.hidden_family = j.at("hidden_family").get<std::string>();
        o.hidden = j.at("hidden").get<std::size_t>();
        o.history = j.at("history").get<std::size_t>();
        o.standardize = j.at("standardize").get<bool>();
        return o;
    }
};

int run_train(TrainOptions opts) {
    if (opts.report_path.empty()) opts.report_path = opts.out + ".report.ndjson";
    const ebm::UnitFamily visible_family = ebm::family_from_name(opts.family);
    const ebm::UnitFamily hidden_family = ebm::family_from_name(opts.hidden_family);
    const ebm::TrainConfig cfg = opts.flags.to_config();

    std::optional<ebm::Standardization> standardization;
    if (opts.standardize && visible_family != ebm::UnitFamily::Gaussian)
        throw ebm::ValidationError("--standardize requires --family gaussian");

    ebm::ModelFile file;
    ebm::TrainReport report;
    if (opts.kind == "crbm") {
        if (opts.standardize)
            throw ebm::ValidationError("--standardize is not supported for sequence models");
        ebm::SequenceDataset data = ebm::read_sequence_csv(opts.data, visible_family);
        auto [model, rep] =
            ebm::train_crbm(cfg, data, opts.hidden, opts.history, hidden_family);
        file.model = std::move(model);
        report = std::move(rep);
    } else {
        ebm::Dataset data = ebm::read_csv(opts.data, visible_family);
        if (opts.standardize) {
            standardization = compute_standardization(data);
            apply_standardization(*standardization, data);
        }
        if (opts.kind == "rbm") {
            auto [model, rep] = ebm::train_rbm(cfg, data, opts.hidden, hidden_family);
            file.model = std::move(model);
            report = std::move(rep);
        } else if (opts.kind == "bm") {
            auto [model, rep] = ebm::train_bm(cfg, data, opts.hidden);
            file.model = std::move(model);
            report = std::move(rep);
        } else {
            throw ebm::ValidationError("--kind must be rbm, bm, or crbm");
        }
    }
    file.standardization = standardization;

    ebm::save_model(file, opts.out);
    ebm::write_report(report, opts.report_path);
    write_manifest("train", opts.to_json(), opts.out);
    report_summary(report);
    return kExitOk;
}

// ---------------------------------------------------------------------------
// pretrain-dbn / finetune-dbn
// ---------------------------------------------------------------------------

struct DbnOptions {
    std::string data;
    std::string out;
    std::string report_path;
    std::string layers;
    std::string stack_path; // finetune only: reuse a pre-trained stack
    std::string family = "binary";
    std::string hidden_family = "binary";
    bool standardize = false;
    bool sample_hidden = false;
    CommonTrainFlags flags;

    json to_json() const {
        json j = flags.to_json();
        j["data"] = data;
        j["out"] = out;
        j["report"] = report_path;
        j["layers"] = layers;
        j["stack"] = stack_path;
        j["family"] = family;
        j["hidden_family"] = hidden_family;
        j["standardize"] = standardize;
        j["sample_hidden"] = sample_hidden;
        return j;
    }

    static DbnOptions from_json(const json& j) {
        DbnOptions o;
        o.flags = CommonTrainFlags::from_json(j);
        o.data = j.at("data").get<std::string>();
        o.out = j.at("out").get<std::string>();
        o.report_path = j.at("report").get<std::string>();
        o.layers = j.at("layers").get<std::string>();
        o.stack_path = j.at("stack").get<std::string>();
        o.family = j.at("family").get<std::string>();
        o.hidden_family = j.at("hidden_family").get<std::string>();
        o.standardize = j.at("standardize").get<bool>();
        o.sample_hidden = j.at("sample_hidden").get<bool>();
        return o;
    }
};

ebm::Dataset load_dbn_data(const DbnOptions& opts, std::optional<ebm::Standardization>& std_out) {
    const ebm::UnitFamily family = ebm::family_from_name(opts.family);
    if (opts.standardize && family != ebm::UnitFamily::Gaussian)
        throw ebm::ValidationError("--standardize requires --family gaussian");
    ebm::Dataset data = ebm::read_csv(opts.data, family);
    if (opts.standardize) {
        std_out = compute_standardization(data);
        apply_standardization(*std_out, data);
    }
    return data;
}

ebm::DbnSpec make_spec(const DbnOptions& opts, const ebm::Dataset& data) {
    ebm::DbnSpec spec;
    spec.layer_sizes = parse_layer_list(opts.layers);
    spec.hidden_family = ebm::family_from_name(opts.hidden_family);
    if (spec.layer_sizes.size() < 2)
        throw ebm::ValidationError("--layers needs at least two sizes");
    if (spec.layer_sizes.front() != data.dim)
        throw ebm::ValidationError("--layers: first size " +
                                   std::to_string(spec.layer_sizes.front()) +
                                   " must equal the data dimension " + std::to_string(data.dim));
    return spec;
}

int run_pretrain_dbn(DbnOptions opts) {
    if (opts.report_path.empty()) opts.report_path = opts.out + ".report.ndjson";
    std::optional<ebm::Standardization> standardization;
    const ebm::Dataset data = load_dbn_data(opts, standardization);
    const ebm::DbnSpec spec = make_spec(opts, data);
    ebm::TrainConfig cfg = opts.flags.to_config();
    cfg.sample_hidden = opts.sample_hidden;

    const ebm::DbnStack stack = ebm::pretrain(spec, data, cfg);
    ebm::save_model(ebm::ModelFile{stack, standardization}, opts.out);
    write_manifest("pretrain-dbn", opts.to_json(), opts.out);
    std::fprintf(stderr, "pre-trained %zu layer pairs\n", stack.layers.size());
    return kExitOk;
}

int run_finetune_dbn(DbnOptions opts) {
    if (opts.report_path.empty()) opts.report_path = opts.out + ".report.ndjson";
    ebm::TrainConfig cfg = opts.flags.to_config();
    cfg.sample_hidden = opts.sample_hidden;

    std::optional<ebm::Standardization> standardization;
    ebm::DbnStack stack;
    ebm::Dataset data;
    if (!opts.stack_path.empty()) {
        ebm::ModelFile file = ebm::load_model(opts.stack_path);
        if (auto* s = std::get_if<ebm::DbnStack>(&file.model)) {
            stack = std::move(*s);
        } else {
            throw ebm::ValidationError("--stack file does not hold a layer stack");
        }
        // The stack's recorded scaling takes precedence so fine-tuning sees
        // the same inputs that pre-training saw.
        data = ebm::read_csv(opts.data, ebm::family_from_name(opts.family));
        if (file.standardization) {
            standardization = file.standardization;
            apply_standardization(*standardization, data);
        } else if (opts.standardize) {
            standardization = compute_standardization(data);
            apply_standardization(*standardization, data);
        }
    } else {
        data = load_dbn_data(opts, standardization);
        const ebm::DbnSpec spec = make_spec(opts, data);
        stack = ebm::pretrain(spec, data, cfg);
    }

    ebm::Mlp mlp = ebm::unroll_autoencoder(stack);
    auto [tuned, report] = ebm::finetune(std::move(mlp), data, cfg);
    ebm::save_model(ebm::ModelFile{tuned, standardization}, opts.out);
    ebm::write_report(report, opts.report_path);
    write_manifest("finetune-dbn", opts.to_json(), opts.out);
    report_summary(report);
    return kExitOk;
}

// ---------------------------------------------------------------------------
// sample
// ---------------------------------------------------------------------------

struct SampleOptions {
    std::string model;
    std::string out;
    std::size_t n = 100;
    std::size_t burn_in = 100;
    std::size_t thin = 1;
    std::uint64_t seed = 0;

    json to_json() const {
        return {{"model", model}, {"out", out},   {"n", n},
                {"burn_in", burn_in}, {"thin", thin}, {"seed", seed}};
    }

    static SampleOptions from_json(const json& j) {
        SampleOptions o;
        o.model = j.at("model").get<std::string>();
        o.out = j.at("out").get<std::string>();
        o.n = j.at("n").get<std::size_t>();
        o.burn_in = j.at("burn_in").get<std::size_t>();
        o.thin = j.at("thin").get<std::size_t>();
        o.seed = j.at("seed").get<std::uint64_t>();
        return o;
    }
};

int run_sample(const SampleOptions& opts) {
    ebm::ModelFile file = ebm::load_model(opts.model);
    ebm::RngStream rng(opts.seed, ebm::stream_tag::generate);
    ebm::Dataset samples;
    if (const auto* rbm = std::get_if<ebm::RbmParams>(&file.model)) {
        samples = ebm::generate(*rbm, opts.n, opts.burn_in, opts.thin, rng);
    } else if (const auto* bm = std::get_if<ebm::BmParams>(&file.model)) {
        samples = ebm::generate_bm(*bm, opts.n, opts.burn_in, opts.thin, rng);
    } else {
        throw ebm::ValidationError("sample needs an rbm or bm model file");
    }
    if (file.standardization)
        for (ebm::Vector& row : samples.rows) row = unstandardize(*file.standardization, row);
    ebm::write_csv(samples, opts.out, "v");
    write_manifest("sample", opts.to_json(), opts.out);
    std::fprintf(stderr, "wrote %zu samples\n", samples.size());
    return kExitOk;
}

// ---------------------------------------------------------------------------
// encode / reconstruct
// ---------------------------------------------------------------------------

struct CodecOptions {
    std::string model;
    std::string data;
    std::string out;

    json to_json() const { return {{"model", model}, {"data", data}, {"out", out}}; }

    static CodecOptions from_json(const json& j) {
        CodecOptions o;
        o.model = j.at("model").get<std::string>();
        o.data = j.at("data").get<std::string>();
        o.out = j.at("out").get<std::string>();
        return o;
    }
};

ebm::Mlp codec_mlp(const ebm::ModelFile& file) {
    if (const auto* mlp = std::get_if<ebm::Mlp>(&file.model)) return *mlp;
    if (const auto* stack = std::get_if<ebm::DbnStack>(&file.model))
        return ebm::unroll_autoencoder(*stack);
    throw ebm::ValidationError("encode/reconstruct needs an mlp or dbn_stack model file");
}

int run_codec(const CodecOptions& opts, bool encode_only) {
    const ebm::ModelFile file = ebm::load_model(opts.model);
    const ebm::Mlp mlp = codec_mlp(file);
    const std::size_t in_dim = mlp.layers.front().weight.rows();

    // Input values are validated only for shape; codes and reconstructions are
    // real-valued regardless of the training family.
    ebm::Dataset data = ebm::read_csv(opts.data, ebm::UnitFamily::Gaussian);
    if (data.size() > 0 && data.dim != in_dim)
        throw ebm::ValidationError("data dimension " + std::to_string(data.dim) +
                                   " does not match the model input " + std::to_string(in_dim));
    if (file.standardization) apply_standardization(*file.standardization, data);

    std::vector<ebm::Vector> rows;
    rows.reserve(data.size());
    for (const ebm::Vector& x : data.rows) {
        ebm::Vector y = encode_only ? ebm::encode(mlp, x) : ebm::reconstruct(mlp, x);
        if (!encode_only && file.standardization) y = unstandardize(*file.standardization, y);
        rows.push_back(std::move(y));
    }
    const std::size_t out_dim =
        encode_only ? mlp.layers[mlp.code_layer - 1].weight.cols() : in_dim;
    ebm::write_csv(rows, out_dim, opts.out, encode_only ? "z" : "x");
    write_manifest(encode_only ? "encode" : "reconstruct", opts.to_json(), opts.out);
    std::fprintf(stderr, "wrote %zu rows\n", rows.size());
    return kExitOk;
}

// ---------------------------------------------------------------------------
// oracle-check
// ---------------------------------------------------------------------------

struct OracleCheckOptions {
    std::string model;
    std::string data; // optional
    std::string out;  // machine-readable report; default derived from model

    json to_json() const { return {{"model", model}, {"data", data}, {"out", out}}; }

    static OracleCheckOptions from_json(const json& j) {
        OracleCheckOptions o;
        o.model = j.at("model").get<std::string>();
        o.data = j.at("data").get<std::string>();
        o.out = j.at("out").get<std::string>();
        return o;
    }
};

int run_oracle_check(OracleCheckOptions opts) {
    if (opts.out.empty()) opts.out = opts.model + ".check.json";
    const ebm::ModelFile file = ebm::load_model(opts.model);

    std::optional<ebm::Dataset> data;
    ebm::CheckReport report;
    if (const auto* rbm = std::get_if<ebm::RbmParams>(&file.model)) {
        if (!opts.data.empty()) data = ebm::read_csv(opts.data, rbm->visible_family);
        report = ebm::oracle_check_rbm(*rbm, data ? &*data : nullptr);
    } else if (const auto* bm = std::get_if<ebm::BmParams>(&file.model)) {
        if (!opts.data.empty()) data = ebm::read_csv(opts.data, bm->rbm.visible_family);
        report = ebm::oracle_check_bm(*bm, data ? &*data : nullptr);
    } else {
        throw ebm::ValidationError("oracle-check needs an rbm or bm model file");
    }

    json out_json;
    out_json["model"] = opts.model;
    out_json["all_passed"] = report.all_passed();
    json checks = json::array();
    for (const ebm::CheckResult& c : report.checks) {
        std::printf("[%s] %s (deviation %.3g, tolerance %.3g)\n", c.passed ? "PASS" : "FAIL",
                    c.name.c_str(), c.deviation, c.tolerance);
        checks.push_back({{"name", c.name},
                          {"passed", c.passed},
                          {"deviation", c.deviation},
                          {"tolerance", c.tolerance}});
    }
    out_json["checks"] = std::move(checks);
    std::ofstream out(opts.out);
    if (!out) throw ebm::Error("cannot write '" + opts.out + "'");
    out << out_json.dump(2) << '\n';
    write_manifest("oracle-check", opts.to_json(), opts.out);

    if (!report.all_passed()) {
        std::fprintf(stderr, "oracle check failed\n");
        return kExitCheckFailed;
    }
    std::fprintf(stderr, "all checks passed\n");
    return kExitOk;
}

// ---------------------------------------------------------------------------
// rerun
// ---------------------------------------------------------------------------

int dispatch_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ebm::ValidationError("cannot open manifest '" + path + "'");
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw ebm::ParseError("invalid manifest JSON: " + std::string(e.what()));
    }
    const std::string command = manifest.at("command").get<std::string>();
    const json& args = manifest.at("args");
    if (command == "train") return run_train(TrainOptions::from_json(args));
    if (command == "pretrain-dbn") return run_pretrain_dbn(DbnOptions::from_json(args));
    if (command == "finetune-dbn") return run_finetune_dbn(DbnOptions::from_json(args));
    if (command == "sample") return run_sample(SampleOptions::from_json(args));
    if (command == "encode") return run_codec(CodecOptions::from_json(args), true);
    if (command == "reconstruct") return run_codec(CodecOptions::from_json(args), false);
    if (command == "oracle-check") return run_oracle_check(OracleCheckOptions::from_json(args));
    throw ebm::ValidationError("manifest names unknown command '" + command + "'");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"energy-based model toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", ebm::kVersion);

    TrainOptions train_opts;
    CLI::App* train = app.add_subcommand("train", "train an rbm, bm, or crbm on a CSV dataset");
    train->add_option("--kind", train_opts.kind, "model kind: rbm | bm | crbm");
    train->add_option("--data", train_opts.data, "input CSV")->required();
    train->add_option("--out", train_opts.out, "output model file")->required();
    train->add_option("--report", train_opts.report_path, "report path (NDJSON)");
    train->add_option("--family", train_opts.family, "visible family: binary | gaussian | poisson");
    train->add_option("--hidden-family", train_opts.hidden_family, "hidden family");
    train->add_option("--hidden", train_opts.hidden, "hidden units");
    train->add_option("--history", train_opts.history, "history length (crbm)");
    train->add_flag("--standardize", train_opts.standardize,
                    "standardize gaussian data; recorded in the model file");
    train_opts.flags.add_flags(train);

    DbnOptions pretrain_opts;
    CLI::App* pretrain_cmd =
        app.add_subcommand("pretrain-dbn", "greedy layer-wise pre-training of a stack");
    pretrain_cmd->add_option("--data", pretrain_opts.data, "input CSV")->required();
    pretrain_cmd->add_option("--out", pretrain_opts.out, "output stack file")->required();
    pretrain_cmd->add_option("--layers", pretrain_opts.layers, "layer sizes, e.g. 8,4,2")
        ->required();
    pretrain_cmd->add_option("--family", pretrain_opts.family, "visible family");
    pretrain_cmd->add_option("--hidden-family", pretrain_opts.hidden_family, "hidden family");
    pretrain_cmd->add_flag("--standardize", pretrain_opts.standardize, "standardize gaussian data");
    pretrain_cmd->add_flag("--sample-hidden", pretrain_opts.sample_hidden,
                           "propagate sampled states between stages instead of means");
    pretrain_opts.flags.add_flags(pretrain_cmd);

    DbnOptions finetune_opts;
    CLI::App* finetune_cmd = app.add_subcommand(
        "finetune-dbn", "unroll a stack into an autoencoder and fine-tune it");
    finetune_cmd->add_option("--data", finetune_opts.data, "input CSV")->required();
    finetune_cmd->add_option("--out", finetune_opts.out, "output network file")->required();
    finetune_cmd->add_option("--layers", finetune_opts.layers,
                             "layer sizes (used when no --stack is given)");
    finetune_cmd->add_option("--stack", finetune_opts.stack_path, "pre-trained stack file");
    finetune_cmd->add_option("--family", finetune_opts.family, "visible family");
    finetune_cmd->add_option("--hidden-family", finetune_opts.hidden_family, "hidden family");
    finetune_cmd->add_flag("--standardize", finetune_opts.standardize, "standardize gaussian data");
    finetune_cmd->add_flag("--sample-hidden", finetune_opts.sample_hidden,
                           "propagate sampled states between stages instead of means");
    finetune_opts.flags.add_flags(finetune_cmd);

    SampleOptions sample_opts;
    CLI::App* sample_cmd = app.add_subcommand("sample", "draw visible samples from a model");
    sample_cmd->add_option("--model", sample_opts.model, "model file")->required();
    sample_cmd->add_option("--out", sample_opts.out, "output CSV")->required();
    sample_cmd->add_option("--n", sample_opts.n, "samples to draw");
    sample_cmd->add_option("--burn-in", sample_opts.burn_in, "discarded leading sweeps");
    sample_cmd->add_option("--thin", sample_opts.thin, "keep every thin-th state");
    sample_cmd->add_option("--seed", sample_opts.seed, "random seed");

    CodecOptions encode_opts;
    CLI::App* encode_cmd = app.add_subcommand("encode", "map data rows to code vectors");
    encode_cmd->add_option("--model", encode_opts.model, "mlp or stack file")->required();
    encode_cmd->add_option("--data", encode_opts.data, "input CSV")->required();
    encode_cmd->add_option("--out", encode_opts.out, "output CSV")->required();

    CodecOptions reconstruct_opts;
    CLI::App* reconstruct_cmd =
        app.add_subcommand("reconstruct", "map data rows through the full autoencoder");
    reconstruct_cmd->add_option("--model", reconstruct_opts.model, "mlp or stack file")
        ->required();
    reconstruct_cmd->add_option("--data", reconstruct_opts.data, "input CSV")->required();
    reconstruct_cmd->add_option("--out", reconstruct_opts.out, "output CSV")->required();

    OracleCheckOptions check_opts;
    CLI::App* check_cmd =
        app.add_subcommand("oracle-check", "run enumeration identity checks on a model");
    check_cmd->add_option("--model", check_opts.model, "model file")->required();
    check_cmd->add_option("--data", check_opts.data, "dataset for the gradient check");
    check_cmd->add_option("--out", check_opts.out, "machine-readable report path");

    std::string manifest_path;
    CLI::App* rerun_cmd = app.add_subcommand("rerun", "re-execute a command from its manifest");
    rerun_cmd->add_option("--manifest", manifest_path, "manifest file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (train->parsed()) return run_train(train_opts);
        if (pretrain_cmd->parsed()) return run_pretrain_dbn(pretrain_opts);
        if (finetune_cmd->parsed()) return run_finetune_dbn(finetune_opts);
        if (sample_cmd->parsed()) return run_sample(sample_opts);
        if (encode_cmd->parsed()) return run_codec(encode_opts, true);
        if (reconstruct_cmd->parsed()) return run_codec(reconstruct_opts, false);
        if (check_cmd->parsed()) return run_oracle_check(check_opts);
        if (rerun_cmd->parsed()) return dispatch_manifest(manifest_path);
    } catch (const ebm::CapacityError& e) {
        std::fprintf(stderr, "capacity error: %s\n", e.what());
        return kExitCapacity;
    } catch (const ebm::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    }
    return kExitUsage;
}
