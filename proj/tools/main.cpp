// stylevar: command-line front end for the variation pipeline.
//
// Subcommands:
//   ingest    validate a dataset manifest and print per-style counts
//   run       execute the pipeline against a mock or live backend
//   eval      compute the metric grid for a finished run log
//   report    render grids and aggregate reports
//   simulate  poke the conditioning simulator (gate | attention)

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "stylevar/backends.hpp"
#include "stylevar/conditioning.hpp"
#include "stylevar/errors.hpp"
#include "stylevar/manifest.hpp"
#include "stylevar/mock_server.hpp"
#include "stylevar/pipeline.hpp"
#include "stylevar/report.hpp"
#include "stylevar/tensor.hpp"

namespace {

using nlohmann::json;
namespace sv = stylevar;

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path);
    if (!out) {
        throw sv::ValidationError("cannot write output file: " + out_path);
    }
    out << text;
}

sv::dataset::ExclusionMask build_mask(const std::vector<std::string>& inputs,
                                      const std::vector<std::string>& outputs,
                                      const std::vector<std::string>& pairs) {
    sv::dataset::ExclusionMask mask;
    for (const std::string& label : inputs) {
        mask.excluded_input_styles.insert(sv::dataset::parse_style(label));
    }
    for (const std::string& label : outputs) {
        mask.excluded_output_styles.insert(sv::dataset::parse_style(label));
    }
    for (const std::string& pair : pairs) {
        const std::size_t sep = pair.find(':');
        if (sep == std::string::npos) {
            throw sv::ValidationError("pair exclusion must look like input:output, got \"" +
                                      pair + "\"");
        }
        mask.excluded_pairs.emplace(sv::dataset::parse_style(pair.substr(0, sep)),
                                    sv::dataset::parse_style(pair.substr(sep + 1)));
    }
    return mask;
}

struct IngestOptions {
    std::string manifest;
    std::string out;
};

int cmd_ingest(const IngestOptions& opt) {
    const auto manifest = sv::dataset::load_manifest(opt.manifest);
    json styles = json::object();
    for (const auto& [style, count] : sv::dataset::style_stats(manifest)) {
        styles[std::string(sv::dataset::style_label(style))] = count;
    }
    const json doc{{"total", manifest.records.size()}, {"styles", std::move(styles)}};
    emit(doc.dump(2) + "\n", opt.out);
    if (!opt.out.empty()) {
        std::cout << "manifest ok: " << manifest.records.size() << " records -> " << opt.out
                  << "\n";
    }
    return 0;
}

struct RunOptions {
    std::string manifest;
    std::string config;
    std::string mock_fixtures;
    std::string endpoint;
    std::vector<std::string> targets;
    std::vector<std::string> exclude_inputs;
    std::vector<std::string> exclude_outputs;
    std::vector<std::string> exclude_pairs;
    std::string out = "runs.jsonl";
    int parallelism = 1;
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool timing = false;
};

int cmd_run(const RunOptions& opt) {
    const auto manifest = sv::dataset::load_manifest(opt.manifest);

    sv::pipeline::PipelineConfig cfg;
    if (!opt.config.empty()) {
        cfg = sv::pipeline::load_config(opt.config);
    }
    if (opt.seed_set) {
        cfg.seed = opt.seed;
    }

    std::vector<sv::dataset::StyleId> targets;
    for (const std::string& label : opt.targets) {
        targets.push_back(sv::dataset::parse_style(label));
    }
    if (targets.empty()) {
        targets.push_back(cfg.target_style);
    }
    const auto mask = build_mask(opt.exclude_inputs, opt.exclude_outputs, opt.exclude_pairs);

    std::optional<sv::backends::MockServer> mock;
    sv::backends::BackendEndpoint endpoint;
    if (!opt.mock_fixtures.empty()) {
        mock.emplace(opt.mock_fixtures);
        endpoint.base_url = mock->base_url();
    } else if (!opt.endpoint.empty()) {
        endpoint.base_url = opt.endpoint;
    } else if (const char* env = std::getenv("STYLEVAR_ENDPOINT"); env != nullptr && *env != 0) {
        endpoint.base_url = env;
    } else {
        throw sv::ValidationError(
            "no backend: pass --mock FIXTURES or --endpoint URL, or set STYLEVAR_ENDPOINT");
    }

    const sv::backends::ServiceClient client(endpoint);
    const auto records = sv::pipeline::run_batch(client, manifest, targets, mask, cfg,
                                                 opt.parallelism);
    if (opt.timing) {
        std::ofstream out(opt.out);
        if (!out) {
            throw sv::ValidationError("cannot write run log: " + opt.out);
        }
        for (const auto& record : records) {
            out << sv::pipeline::serialize_run_record(record, true) << '\n';
        }
    } else {
        sv::pipeline::write_run_log(records, opt.out);
    }

    std::size_t ok = 0;
    for (const auto& record : records) {
        ok += record.status == "ok" ? 1 : 0;
    }
    std::cout << "ran " << records.size() << " variations (ok=" << ok
              << " failed=" << records.size() - ok << ") -> " << opt.out << "\n";
    return 0;
}

struct EvalOptions {
    std::string runs;
    std::string index;
    std::string method = "ours";
    std::string format = "json";
    std::string out;
    std::vector<std::string> exclude_inputs;
    std::vector<std::string> exclude_outputs;
    std::vector<std::string> exclude_pairs;
};

int cmd_eval(const EvalOptions& opt) {
    const auto runs = sv::pipeline::read_run_log(opt.runs);
    const auto index = sv::io::TensorIndex::load(opt.index);

    std::map<sv::dataset::StyleId, std::vector<sv::metrics::GramMatrix>> corpus;
    for (const auto& [style, entry] : index.styles) {
        for (const auto& path : entry.corpus) {
            corpus[style].push_back(sv::io::load_gram(path));
        }
    }

    sv::report::EvaluateOptions options;
    options.method = opt.method;
    options.mask = build_mask(opt.exclude_inputs, opt.exclude_outputs, opt.exclude_pairs);
    const auto grid = sv::report::evaluate(runs, index, corpus, options);

    const auto format =
        opt.format == "csv" ? sv::report::GridFormat::csv : sv::report::GridFormat::json;
    emit(sv::report::render_grid(grid, format), opt.out);
    if (!opt.out.empty()) {
        std::cout << "evaluated " << runs.size() << " runs -> " << opt.out << "\n";
    }
    return 0;
}

struct ReportOptions {
    std::string grid;
    std::string in_format;  // "", "csv" or "json"; inferred from extension when empty
    std::string format = "pretty";
    std::string out;
    std::string manifest;
    std::string config;
    bool aggregate = false;
};

int cmd_report(const ReportOptions& opt) {
    std::ifstream in(opt.grid);
    if (!in) {
        throw sv::ValidationError("cannot open grid file: " + opt.grid);
    }
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    std::string in_format = opt.in_format;
    if (in_format.empty()) {
        in_format = opt.grid.ends_with(".csv") ? "csv" : "json";
    }
    const auto grid = sv::report::parse_grid(
        text, in_format == "csv" ? sv::report::GridFormat::csv : sv::report::GridFormat::json);

    if (opt.aggregate) {
        const std::string manifest_fp =
            opt.manifest.empty() ? "" : sv::report::file_fingerprint(opt.manifest);
        const std::string config_fp =
            opt.config.empty() ? "" : sv::report::file_fingerprint(opt.config);
        const auto report = sv::report::aggregate_report(grid, manifest_fp, config_fp);
        emit(sv::report::render_report(grid, report), opt.out);
        return 0;
    }

    std::string rendered;
    if (opt.format == "pretty") {
        rendered = sv::report::render_grid_pretty(grid);
    } else if (opt.format == "csv") {
        rendered = sv::report::render_grid(grid, sv::report::GridFormat::csv);
    } else {
        rendered = sv::report::render_grid(grid, sv::report::GridFormat::json);
    }
    emit(rendered, opt.out);
    return 0;
}

struct GateOptions {
    int total_steps = 50;
    int gate_step = 30;
    double alpha = 0.95;
    double beta = 0.05;
    std::uint64_t seed = 42;
    int tokens = 6;
    int condition_tokens = 4;
    int dim = 8;
};

int cmd_simulate_gate(const GateOptions& opt) {
    namespace cond = sv::conditioning;
    const auto init = cond::seeded_tokens(opt.tokens, opt.dim, opt.seed);
    const auto condition = cond::seeded_tokens(opt.condition_tokens, opt.dim, opt.seed + 1);
    const auto weights = cond::AttentionWeights::seeded(opt.dim, opt.seed + 2);

    cond::SamplerConfig gated{opt.total_steps, opt.gate_step, opt.alpha, opt.beta};
    cond::SamplerConfig ungated = gated;
    ungated.gate_step = gated.total_steps;  // condition never injected

    const auto with_condition = cond::gated_sample(init, condition, gated, weights);
    const auto without_condition = cond::gated_sample(init, condition, ungated, weights);

    std::cout << "total_steps=" << opt.total_steps << " gate_step=" << opt.gate_step
              << " alpha=" << opt.alpha << " beta=" << opt.beta << " seed=" << opt.seed
              << " tokens=" << opt.tokens << " dim=" << opt.dim << "\n";

    int first_divergence = -1;
    for (std::size_t s = 0; s < with_condition.size(); ++s) {
        const double diff = (with_condition[s].latent.tokens - without_condition[s].latent.tokens)
                                .cwiseAbs()
                                .maxCoeff();
        if (diff != 0.0 && first_divergence < 0) {
            first_divergence = with_condition[s].step;
        }
        const bool near_gate = std::abs(with_condition[s].step - opt.gate_step) <= 1;
        if (near_gate || s + 1 == with_condition.size()) {
            std::cout << "step " << with_condition[s].step
                      << ": max |conditioned - unconditional| = " << diff << "\n";
        }
    }
    if (first_divergence < 0) {
        std::cout << "first divergence: none (gate never opened)\n";
    } else {
        std::cout << "first divergence: step " << first_divergence << "\n";
    }
    return 0;
}

struct AttentionOptions {
    int channels = 4;
    int height = 8;
    int width = 8;
    int window = 4;
    std::uint64_t seed = 7;
};

int cmd_simulate_attention(const AttentionOptions& opt) {
    namespace cond = sv::conditioning;
    const auto fm = cond::seeded_feature_map(opt.channels, opt.height, opt.width, opt.seed);
    const auto weights = cond::AttentionWeights::seeded(opt.channels, opt.seed + 1);
    const cond::WindowConfig window{opt.window};

    const auto windows = cond::window_partition(fm, window);
    const auto encoded = cond::style_encode(fm, window, weights);
    std::cout << "feature map " << opt.channels << "x" << opt.height << "x" << opt.width
              << ", window " << opt.window << " -> " << windows.size() << " windows of "
              << windows.front().length() << " tokens\n";
    std::cout << "style encoding: " << encoded.length() << " tokens of dim " << encoded.dim()
              << " (mean=" << encoded.tokens.mean() << " min=" << encoded.tokens.minCoeff()
              << " max=" << encoded.tokens.maxCoeff() << ")\n";

    const auto condition = cond::seeded_tokens(opt.window, opt.channels, opt.seed + 2);
    const auto crossed = cond::cross_attention(windows.front(), condition, weights);
    std::cout << "cross attention: " << crossed.length() << " tokens of dim " << crossed.dim()
              << " (mean=" << crossed.tokens.mean() << ")\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"zero-shot stylized image variation pipeline"};
    app.require_subcommand(1);

    IngestOptions ingest_opt;
    CLI::App* ingest = app.add_subcommand("ingest", "validate a manifest and report counts");
    ingest->add_option("--manifest", ingest_opt.manifest, "manifest JSON file")->required();
    ingest->add_option("--out", ingest_opt.out, "write the stats JSON here instead of stdout");

    RunOptions run_opt;
    CLI::App* run = app.add_subcommand("run", "run the variation pipeline");
    run->add_option("--manifest", run_opt.manifest, "manifest JSON file")->required();
    run->add_option("--config", run_opt.config, "pipeline config JSON file");
    auto* mock_opt = run->add_option("--mock", run_opt.mock_fixtures,
                                     "serve backends in-process from this fixtures file");
    run->add_option("--endpoint", run_opt.endpoint, "base URL of a live backend")
        ->excludes(mock_opt);
    run->add_option("--targets", run_opt.targets, "target style labels")->delimiter(',');
    run->add_option("--parallelism", run_opt.parallelism, "worker threads")
        ->check(CLI::PositiveNumber);
    run->add_option("--out", run_opt.out, "run log path (JSONL)");
    auto* seed_opt = run->add_option("--seed", run_opt.seed, "batch seed override");
    run->add_flag("--timing", run_opt.timing, "include wall-clock timestamps in the log");
    run->add_option("--exclude-input", run_opt.exclude_inputs, "exclude an input style");
    run->add_option("--exclude-output", run_opt.exclude_outputs, "exclude a target style");
    run->add_option("--exclude-pair", run_opt.exclude_pairs, "exclude input:output");

    EvalOptions eval_opt;
    CLI::App* eval = app.add_subcommand("eval", "compute the metric grid for a run log");
    eval->add_option("--runs", eval_opt.runs, "run log (JSONL)")->required();
    eval->add_option("--index", eval_opt.index, "tensor index JSON")->required();
    eval->add_option("--method", eval_opt.method, "method label for the grid");
    eval->add_option("--format", eval_opt.format, "grid output format")
        ->check(CLI::IsMember({"csv", "json"}));
    eval->add_option("--out", eval_opt.out, "write the grid here instead of stdout");
    eval->add_option("--exclude-input", eval_opt.exclude_inputs, "exclude an input style");
    eval->add_option("--exclude-output", eval_opt.exclude_outputs, "exclude a target style");
    eval->add_option("--exclude-pair", eval_opt.exclude_pairs, "exclude input:output");

    ReportOptions report_opt;
    CLI::App* report = app.add_subcommand("report", "render a metric grid");
    report->add_option("--grid", report_opt.grid, "grid file (CSV or JSON)")->required();
    report->add_option("--in-format", report_opt.in_format, "grid input format")
        ->check(CLI::IsMember({"csv", "json"}));
    report->add_option("--format", report_opt.format, "output format")
        ->check(CLI::IsMember({"csv", "json", "pretty"}));
    report->add_option("--out", report_opt.out, "write output here instead of stdout");
    report->add_flag("--aggregate", report_opt.aggregate,
                     "emit the full report JSON with per-method aggregates");
    report->add_option("--manifest", report_opt.manifest, "manifest to fingerprint");
    report->add_option("--config", report_opt.config, "config to fingerprint");

    CLI::App* simulate = app.add_subcommand("simulate", "exercise the conditioning simulator");
    simulate->require_subcommand(1);

    GateOptions gate_opt;
    CLI::App* gate = simulate->add_subcommand("gate", "show where gated sampling diverges");
    gate->add_option("--total-steps", gate_opt.total_steps)->check(CLI::PositiveNumber);
    gate->add_option("--gate-step", gate_opt.gate_step)->check(CLI::NonNegativeNumber);
    gate->add_option("--alpha", gate_opt.alpha);
    gate->add_option("--beta", gate_opt.beta);
    gate->add_option("--seed", gate_opt.seed);
    gate->add_option("--tokens", gate_opt.tokens)->check(CLI::PositiveNumber);
    gate->add_option("--condition-tokens", gate_opt.condition_tokens)->check(CLI::PositiveNumber);
    gate->add_option("--dim", gate_opt.dim)->check(CLI::PositiveNumber);

    AttentionOptions attn_opt;
    CLI::App* attention =
        simulate->add_subcommand("attention", "run windowed and cross attention on seeded data");
    attention->add_option("--channels", attn_opt.channels)->check(CLI::PositiveNumber);
    attention->add_option("--height", attn_opt.height)->check(CLI::PositiveNumber);
    attention->add_option("--width", attn_opt.width)->check(CLI::PositiveNumber);
    attention->add_option("--window", attn_opt.window)->check(CLI::PositiveNumber);
    attention->add_option("--seed", attn_opt.seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    run_opt.seed_set = seed_opt->count() > 0;

    try {
        if (ingest->parsed()) return cmd_ingest(ingest_opt);
        if (run->parsed()) return cmd_run(run_opt);
        if (eval->parsed()) return cmd_eval(eval_opt);
        if (report->parsed()) return cmd_report(report_opt);
        if (simulate->parsed()) {
            if (gate->parsed()) return cmd_simulate_gate(gate_opt);
            if (attention->parsed()) return cmd_simulate_attention(attn_opt);
        }
    } catch (const sv::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
