#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "stylevar/conditioning.hpp"
#include "stylevar/errors.hpp"
#include "stylevar/report.hpp"
#include "stylevar/rng.hpp"
#include "stylevar/tensor.hpp"
#include "support/helpers.hpp"

using namespace stylevar;
using dataset::StyleId;
using report::BenchGrid;
using report::GridFormat;
using report::MetricCell;
using testsupport::TempDir;

namespace {

BenchGrid small_grid() {
    BenchGrid grid;
    grid.input_styles = {"photo", "ink-painting"};
    grid.target_styles = {"anime", "impression"};
    grid.methods = {"ours", "baseline"};
    grid.fill_dense();
    grid.slot("photo", "anime", "ours") = {6.36, 0.57, 17.03, 27.42, false};
    grid.slot("photo", "anime", "baseline") = {7.5, 0.5, 20.0, 25.0, false};
    grid.slot("photo", "impression", "ours") = {5.0, 0.6, std::nullopt, 26.0, false};
    grid.slot("ink-painting", "impression", "baseline").excluded = true;
    grid.slot("ink-painting", "impression", "ours").excluded = true;
    return grid;
}

BenchGrid random_grid(rng::PortableRng& gen) {
    BenchGrid grid;
    const auto axis = [&](const std::string& prefix, int max_len) {
        std::vector<std::string> out;
        const int n = 1 + static_cast<int>(gen.next_u64() % static_cast<std::uint64_t>(max_len));
        for (int i = 0; i < n; ++i) {
            out.push_back(prefix + std::to_string(i));
        }
        return out;
    };
    grid.input_styles = axis("in", 3);
    grid.target_styles = axis("out", 3);
    grid.methods = axis("m", 3);
    grid.fill_dense();
    for (auto& [key, cell] : grid.cells) {
        const std::uint64_t roll = gen.next_u64() % 10;
        if (roll == 0) {
            cell.excluded = true;
            continue;
        }
        for (auto field : {&MetricCell::sml, &MetricCell::cms, &MetricCell::fid,
                           &MetricCell::clips}) {
            if (gen.next_u64() % 8 != 0) {
                // Mix magnitudes so shortest-round-trip formatting is exercised.
                cell.*field = gen.symmetric() * std::pow(10.0, static_cast<double>(
                                                                   gen.next_u64() % 20) - 10.0);
            }
        }
    }
    return grid;
}

// A minimal successful run; evaluate() only looks at these four fields.
pipeline::RunRecord ok_run(const std::string& id, StyleId input, StyleId target) {
    pipeline::RunRecord run;
    run.record_id = id;
    run.input_style = input;
    run.target_style = target;
    run.status = "ok";
    return run;
}

Eigen::VectorXd seeded_vector(int dim, std::uint64_t seed) {
    rng::PortableRng gen(seed);
    Eigen::VectorXd v(dim);
    for (int i = 0; i < dim; ++i) {
        v(i) = gen.symmetric();
    }
    return v;
}

/// Scratch tensor fileset backing a handful of runs against two styles.
struct EvalFixture {
    TempDir dir;
    io::TensorIndex index;
    std::map<StyleId, std::vector<metrics::GramMatrix>> corpus;
    std::vector<pipeline::RunRecord> runs;
    int embedding_dim = 4;
    std::uint64_t next_seed = 1;

    std::filesystem::path write_vec(const std::string& name, const Eigen::VectorXd& v) {
        const auto p = dir.file(name);
        io::write_tensor(p, io::from_vector(v));
        return p;
    }

    void add_style(StyleId style, bool with_reference = true, int reference_rows = 3) {
        const std::string label(dataset::style_label(style));
        io::StyleTensorEntry entry;
        entry.style_text_embedding =
            write_vec("style-" + label + ".tns", seeded_vector(embedding_dim, next_seed++));
        if (with_reference) {
            Eigen::MatrixXd refs(reference_rows, embedding_dim);
            for (int r = 0; r < reference_rows; ++r) {
                refs.row(r) = seeded_vector(embedding_dim, next_seed++);
            }
            const auto p = dir.file("refs-" + label + ".tns");
            io::write_tensor(p, io::from_matrix(refs));
            entry.reference_embeddings = p;
        }
        index.styles[style] = entry;

        std::vector<metrics::GramMatrix> grams;
        for (int i = 0; i < 2; ++i) {
            grams.push_back(metrics::gram(conditioning::seeded_feature_map(3, 2, 2, next_seed++)));
        }
        corpus[style] = std::move(grams);
    }

    void add_run(const std::string& id, StyleId input, StyleId target) {
        runs.push_back(ok_run(id, input, target));
        const std::string key = io::TensorIndex::run_key(id, target);
        io::RunTensorEntry entry;
        const auto fm = conditioning::seeded_feature_map(3, 2, 2, next_seed++);
        const auto features = dir.file("feat-" + id + ".tns");
        io::write_tensor(features, io::from_feature_map(fm));
        entry.result_features = features;
        entry.source_text_embedding =
            write_vec("src-" + id + ".tns", seeded_vector(embedding_dim, next_seed++));
        entry.result_text_embedding =
            write_vec("txt-" + id + ".tns", seeded_vector(embedding_dim, next_seed++));
        entry.result_image_embedding =
            write_vec("img-" + id + ".tns", seeded_vector(embedding_dim, next_seed++));
        index.runs[key] = entry;
    }

    struct Expected {
        double sml, cms, clips;
    };

    /// Recomputes one run's metrics straight from the files.
    Expected expected_for(const std::string& id, StyleId target) const {
        const auto& entry = index.runs.at(io::TensorIndex::run_key(id, target));
        const auto gram = io::load_gram(*entry.result_features);
        const metrics::EmbeddingVec src{io::to_vector(io::read_tensor(*entry.source_text_embedding))};
        const metrics::EmbeddingVec txt{io::to_vector(io::read_tensor(*entry.result_text_embedding))};
        const metrics::EmbeddingVec img{io::to_vector(io::read_tensor(*entry.result_image_embedding))};
        const metrics::EmbeddingVec style{
            io::to_vector(io::read_tensor(*index.styles.at(target).style_text_embedding))};
        return {metrics::sml(gram, corpus.at(target)), metrics::cms(src, txt),
                metrics::clips(img, style)};
    }
};

}  // namespace

TEST_SUITE("report") {

TEST_CASE("grid access is dense after fill_dense and throws on unknown keys") {
    BenchGrid grid;
    grid.input_styles = {"a"};
    grid.target_styles = {"b"};
    grid.methods = {"m1", "m2"};
    grid.fill_dense();
    CHECK(grid.cells.size() == 2);
    CHECK(!grid.at("a", "b", "m1").sml.has_value());
    CHECK_THROWS_AS(grid.at("a", "b", "m3"), ValidationError);
    grid.slot("a", "b", "m1").sml = 1.5;
    CHECK(grid.at("a", "b", "m1").sml == 1.5);
}

TEST_CASE("the CSV form has one metric block per target and dashes for exclusions") {
    const BenchGrid grid = small_grid();
    const std::string csv = report::render_grid(grid, GridFormat::csv);
    const auto lines = [&] {
        std::vector<std::string> out;
        std::size_t start = 0;
        for (std::size_t pos; (pos = csv.find('\n', start)) != std::string::npos; start = pos + 1) {
            out.push_back(csv.substr(start, pos - start));
        }
        return out;
    }();
    REQUIRE(lines.size() == 5);  // header + 2 inputs x 2 methods
    CHECK(lines[0] ==
          "input_style,method,anime:sml,anime:cms,anime:fid,anime:clips,"
          "impression:sml,impression:cms,impression:fid,impression:clips");
    CHECK(lines[1] == "photo,ours,6.36,0.57,17.03,27.42,5,0.6,,26");
    CHECK(lines[3].substr(0, 17) == "ink-painting,ours");
    CHECK(lines[3].find(",-,-,-,-") != std::string::npos);
}

TEST_CASE("CSV and JSON renderings parse back to the identical grid") {
    const BenchGrid grid = small_grid();
    for (GridFormat format : {GridFormat::csv, GridFormat::json}) {
        const auto text = report::render_grid(grid, format);
        const BenchGrid back = report::parse_grid(text, format);
        CHECK(back == grid);
        // Render-parse-render is a fixed point.
        CHECK(report::render_grid(back, format) == text);
    }
}

TEST_CASE("round-trip identity holds for randomized grids") {
    rng::PortableRng gen(401);
    for (int round = 0; round < 40; ++round) {
        const BenchGrid grid = random_grid(gen);
        CHECK(report::parse_grid(report::render_grid(grid, GridFormat::csv), GridFormat::csv) ==
              grid);
        CHECK(report::parse_grid(report::render_grid(grid, GridFormat::json), GridFormat::json) ==
              grid);
    }
}

TEST_CASE("labels that would corrupt the CSV are refused at render time") {
    BenchGrid grid;
    grid.input_styles = {"has,comma"};
    grid.target_styles = {"t"};
    grid.methods = {"m"};
    grid.fill_dense();
    CHECK_THROWS_AS(report::render_grid(grid, GridFormat::csv), ValidationError);
    grid.input_styles = {"has:colon"};
    grid.cells.clear();
    grid.fill_dense();
    CHECK_THROWS_AS(report::render_grid(grid, GridFormat::csv), ValidationError);
    // JSON has no such restriction.
    CHECK_NOTHROW(report::render_grid(grid, GridFormat::json));
}

TEST_CASE("malformed grid documents are rejected") {
    CHECK_THROWS_AS(report::parse_grid("", GridFormat::csv), ValidationError);
    CHECK_THROWS_AS(report::parse_grid("wrong,header\n", GridFormat::csv), ValidationError);
    CHECK_THROWS_AS(report::parse_grid("input_style,method,a:sml\n", GridFormat::csv),
                    ValidationError);  // truncated metric block
    CHECK_THROWS_AS(
        report::parse_grid("input_style,method,a:sml,b:cms,a:fid,a:clips\n", GridFormat::csv),
        ValidationError);  // mixed targets inside a block
    CHECK_THROWS_AS(
        report::parse_grid("input_style,method,a:sml,a:cms,a:fid,a:clips\np,m,1,2\n",
                           GridFormat::csv),
        ValidationError);  // short row
    CHECK_THROWS_AS(
        report::parse_grid("input_style,method,a:sml,a:cms,a:fid,a:clips\np,m,1,2,x,4\n",
                           GridFormat::csv),
        ValidationError);  // unparseable number
    CHECK_THROWS_AS(
        report::parse_grid("input_style,method,a:sml,a:cms,a:fid,a:clips\np,m,-,2,3,4\n",
                           GridFormat::csv),
        ValidationError);  // partial dash
    CHECK_THROWS_AS(report::parse_grid("{", GridFormat::json), ValidationError);
    CHECK_THROWS_AS(report::parse_grid(R"({"input_styles": []})", GridFormat::json),
                    ValidationError);
}

TEST_CASE("the pretty table marks the best and second-best distinct values") {
    BenchGrid grid;
    grid.input_styles = {"photo"};
    grid.target_styles = {"anime"};
    grid.methods = {"ours", "base", "mid"};
    grid.fill_dense();
    grid.slot("photo", "anime", "ours") = {1.0, 0.9, 10.0, 90.0, false};
    grid.slot("photo", "anime", "base") = {2.0, 0.8, 12.0, 80.0, false};
    grid.slot("photo", "anime", "mid") = {2.0, 0.7, 11.0, 85.0, false};

    const std::string table = report::render_grid_pretty(grid);
    // sml: lower is better -> 1.0 best, the tied 2.0s share the runner-up mark.
    CHECK(table.find("1.000*") != std::string::npos);
    CHECK(std::count(table.begin(), table.end(), '^') >= 2);
    CHECK(table.find("2.000^") != std::string::npos);
    // clips: higher is better -> 90 best, 85 second.
    CHECK(table.find("90.000*") != std::string::npos);
    CHECK(table.find("85.000^") != std::string::npos);
    CHECK(table.find("80.000*") == std::string::npos);

    // Joint winners are both starred.
    grid.slot("photo", "anime", "base").sml = 1.0;
    const std::string tied = report::render_grid_pretty(grid);
    std::size_t stars = 0;
    for (std::size_t pos = 0; (pos = tied.find("1.000*", pos)) != std::string::npos; ++pos) {
        ++stars;
    }
    CHECK(stars == 2);

    // Excluded cells render as dashes and never take a mark.
    grid.slot("photo", "anime", "mid").excluded = true;
    CHECK(report::render_grid_pretty(grid).find('-') != std::string::npos);
}

TEST_CASE("aggregation averages the non-excluded cells per method") {
    const BenchGrid grid = small_grid();
    const auto rep = report::aggregate_report(grid, "mfp", "cfp");
    CHECK(rep.methods == grid.methods);
    CHECK(rep.manifest_fingerprint == "mfp");
    CHECK(rep.config_fingerprint == "cfp");
    CHECK(!rep.created_at.empty());

    const auto& ours = rep.aggregates.at("ours");
    // photo->anime and photo->impression contribute; the excluded
    // ink-painting cells do not; empty cells contribute nothing.
    CHECK(ours.sml == doctest::Approx((6.36 + 5.0) / 2));
    CHECK(ours.cms == doctest::Approx((0.57 + 0.6) / 2));
    CHECK(ours.fid == doctest::Approx(17.03));  // only one cell carries fid
    CHECK(ours.clips == doctest::Approx((27.42 + 26.0) / 2));

    const auto& baseline = rep.aggregates.at("baseline");
    CHECK(baseline.sml == doctest::Approx(7.5));
    CHECK(baseline.fid == doctest::Approx(20.0));
}

TEST_CASE("reports serialize with provenance and parse back") {
    const BenchGrid grid = small_grid();
    const auto rep = report::aggregate_report(grid, "abc123", "def456");
    const std::string text = report::render_report(grid, rep);
    const auto parsed = report::parse_report_aggregates(text);
    CHECK(parsed.methods == rep.methods);
    CHECK(parsed.manifest_fingerprint == "abc123");
    CHECK(parsed.config_fingerprint == "def456");
    CHECK(parsed.created_at == rep.created_at);
    CHECK(parsed.aggregates.at("ours").sml == rep.aggregates.at("ours").sml);
    CHECK(parsed.aggregates.at("ours").fid == rep.aggregates.at("ours").fid);

    CHECK_THROWS_AS(report::parse_report_aggregates("[]"), ValidationError);
    CHECK_THROWS_AS(report::parse_report_aggregates("{"), ValidationError);
}

TEST_CASE("file fingerprints match the streaming hash on known inputs") {
    TempDir dir;
    CHECK(report::file_fingerprint(dir.write("empty.bin", "")) == "cbf29ce484222325");
    CHECK(report::file_fingerprint(dir.write("abc.bin", "abc")) == "e71fa2190541574b");
    const std::string big(10000, 'x');
    CHECK(report::file_fingerprint(dir.write("big.bin", big)) ==
          [&] {
              std::uint64_t state = rng::fnv1a64(big);
              static const char* digits = "0123456789abcdef";
              std::string out(16, '0');
              for (int i = 15; i >= 0; --i) {
                  out[static_cast<std::size_t>(i)] = digits[state & 0xf];
                  state >>= 4;
              }
              return out;
          }());
    CHECK_THROWS_AS(report::file_fingerprint(dir.path() / "absent"), ValidationError);
}

TEST_CASE("evaluation turns runs plus tensors into per-cell means") {
    EvalFixture fx;
    fx.add_style(StyleId::anime);
    fx.add_style(StyleId::impression);
    fx.add_run("r1", StyleId::photo, StyleId::anime);
    fx.add_run("r2", StyleId::photo, StyleId::anime);
    fx.add_run("r3", StyleId::photo, StyleId::impression);
    fx.runs.push_back(ok_run("r9", StyleId::photo, StyleId::anime));
    fx.runs.back().status = "failed";  // failed runs need no tensors

    const BenchGrid grid = report::evaluate(fx.runs, fx.index, fx.corpus);
    CHECK(grid.input_styles == std::vector<std::string>{"photo"});
    CHECK(grid.target_styles == std::vector<std::string>{"anime", "impression"});
    CHECK(grid.methods == std::vector<std::string>{"ours"});

    const auto e1 = fx.expected_for("r1", StyleId::anime);
    const auto e2 = fx.expected_for("r2", StyleId::anime);
    const auto& anime_cell = grid.at("photo", "anime", "ours");
    CHECK(*anime_cell.sml == doctest::Approx((e1.sml + e2.sml) / 2).epsilon(1e-12));
    CHECK(*anime_cell.cms == doctest::Approx((e1.cms + e2.cms) / 2).epsilon(1e-12));
    CHECK(*anime_cell.clips == doctest::Approx((e1.clips + e2.clips) / 2).epsilon(1e-12));
    REQUIRE(anime_cell.fid.has_value());

    // Two runs in the cell and a reference set -> the Frechet distance is
    // exactly what the metric primitives produce on the same tensors.
    Eigen::MatrixXd stacked(2, fx.embedding_dim);
    stacked.row(0) = io::to_vector(io::read_tensor(
        *fx.index.runs.at("r1:anime").result_image_embedding));
    stacked.row(1) = io::to_vector(io::read_tensor(
        *fx.index.runs.at("r2:anime").result_image_embedding));
    const Eigen::MatrixXd refs = io::to_matrix(io::read_tensor(
        *fx.index.styles.at(StyleId::anime).reference_embeddings));
    const double expected_fid = metrics::fid(metrics::gaussian_stats({stacked}),
                                             metrics::gaussian_stats({refs}));
    CHECK(*anime_cell.fid == doctest::Approx(expected_fid).epsilon(1e-12));

    // One run only: means degenerate to that run, and no FID.
    const auto e3 = fx.expected_for("r3", StyleId::impression);
    const auto& imp_cell = grid.at("photo", "impression", "ours");
    CHECK(*imp_cell.sml == doctest::Approx(e3.sml).epsilon(1e-12));
    CHECK(!imp_cell.fid.has_value());
}

TEST_CASE("evaluation skips masked cells and omits FID without references") {
    EvalFixture fx;
    fx.add_style(StyleId::anime, /*with_reference=*/false);
    fx.add_style(StyleId::impression);
    fx.add_run("r1", StyleId::photo, StyleId::anime);
    fx.add_run("r2", StyleId::photo, StyleId::anime);
    fx.add_run("r3", StyleId::photo, StyleId::impression);

    report::EvaluateOptions options;
    options.mask.excluded_pairs = {{StyleId::photo, StyleId::impression}};
    // r3's tensors could even be absent: masked runs are never audited.
    fx.index.runs.erase("r3:impression");

    const BenchGrid grid = report::evaluate(fx.runs, fx.index, fx.corpus, options);
    CHECK(grid.at("photo", "impression", "ours").excluded);
    CHECK(!grid.at("photo", "impression", "ours").sml.has_value());
    CHECK(grid.at("photo", "anime", "ours").sml.has_value());
    CHECK(!grid.at("photo", "anime", "ours").fid.has_value());  // no reference set
}

TEST_CASE("evaluation lists every missing artifact in one error") {
    EvalFixture fx;
    fx.add_style(StyleId::anime);
    fx.add_run("r1", StyleId::photo, StyleId::anime);
    fx.add_run("r2", StyleId::photo, StyleId::anime);
    fx.add_run("r3", StyleId::photo, StyleId::impression);

    // Break three independent things: one run entry gone, one field gone,
    // and a whole style unprovisioned.
    fx.index.runs.erase("r2:anime");
    fx.index.runs.at("r1:anime").result_text_embedding.reset();

    try {
        report::evaluate(fx.runs, fx.index, fx.corpus);
        FAIL("expected a ValidationError");
    } catch (const ValidationError& e) {
        const std::string message = e.what();
        CHECK(message.find("run r1:anime: missing result_text_embedding") != std::string::npos);
        CHECK(message.find("run r2:anime: no tensor index entry") != std::string::npos);
        CHECK(message.find("style impression: missing style_text_embedding") !=
              std::string::npos);
        CHECK(message.find("style impression: no corpus Gram matrices") != std::string::npos);
    }
}

TEST_CASE("reference sets with mismatched width cannot produce a FID") {
    EvalFixture fx;
    fx.add_style(StyleId::anime);
    fx.add_run("r1", StyleId::photo, StyleId::anime);
    fx.add_run("r2", StyleId::photo, StyleId::anime);

    // Swap in a reference set with the wrong embedding width.
    Eigen::MatrixXd refs(3, fx.embedding_dim + 1);
    refs.setZero();
    const auto p = fx.dir.file("bad-refs.tns");
    io::write_tensor(p, io::from_matrix(refs));
    fx.index.styles.at(StyleId::anime).reference_embeddings = p;

    const BenchGrid grid = report::evaluate(fx.runs, fx.index, fx.corpus);
    CHECK(grid.at("photo", "anime", "ours").sml.has_value());
    CHECK(!grid.at("photo", "anime", "ours").fid.has_value());
}

}  // TEST_SUITE
