#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "foodaccess/pipeline.hpp"
#include "json.hpp"

using namespace foodaccess;
using namespace foodaccess::pipeline;

namespace {

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& leaf) {
        path = std::filesystem::temp_directory_path() / leaf;
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string str() const { return path.string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

std::string write_file(const TempDir& dir, const std::string& name,
                       const std::string& content) {
    const std::filesystem::path p = dir.path / name;
    std::ofstream out(p, std::ios::binary);
    out << content;
    return p.string();
}

// Generates a small corpus and returns a RunConfig pointing at it.
RunConfig small_run(const TempDir& dir, const std::string& extra_models = "EII,VVV") {
    std::map<std::string, std::string> kv = {{"n_families", "1200"},
                                             {"n_agencies", "5"},
                                             {"n_tracts", "10"},
                                             {"seed", "19"}};
    const synth::SynthConfig sc = synth_config_from_map(kv);
    run_synth(sc, dir.str() + "/data", "");

    std::map<std::string, std::string> rkv = {
        {"services", dir.str() + "/data/services.csv"},
        {"agencies", dir.str() + "/data/agencies.csv"},
        {"tract_income", dir.str() + "/data/tract_income.csv"},
        {"outdir", dir.str() + "/out"},
        {"models", extra_models},
        {"k_min", "2"},
        {"k_max", "5"},
        {"restarts", "2"},
        {"tol", "1e-6"},
        {"seed", "5"},
        {"silhouette_sample", "300"}};
    return RunConfig::from_map(rkv);
}

}  // namespace

TEST_CASE("parse_kv_file") {
    TempDir dir("foodaccess_pipe_kv");
    const std::string p = write_file(dir, "run.cfg",
                                     "# comment\n"
                                     "  seed = 42  \n"
                                     "outdir=out\n"
                                     "\n"
                                     "seed=43\n");
    const auto kv = parse_kv_file(p);
    CHECK(kv.at("seed") == "43");  // later duplicates win
    CHECK(kv.at("outdir") == "out");
    CHECK(kv.size() == 2);

    const std::string bad = write_file(dir, "bad.cfg", "no_equals_sign\n");
    CHECK_THROWS_AS(parse_kv_file(bad), DataError);
    CHECK_THROWS_AS(parse_kv_file((dir.path / "absent.cfg").string()), DataError);
}

TEST_CASE("config hash and stamp") {
    const std::map<std::string, std::string> a = {{"x", "1"}, {"y", "2"}};
    const std::map<std::string, std::string> b = {{"y", "2"}, {"x", "1"}};
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_hash(a) != config_hash({{"x", "1"}, {"y", "3"}}));
    CHECK(config_hash(a) != config_hash({{"x", "1"}}));

    RunConfig rc;
    rc.hash = 0xabcULL;
    rc.fit.seed = 7;
    const std::string stamp = rc.stamp();
    CHECK(stamp == "foodaccess 0.1.0 config=0000000000000abc seed=7");
}

TEST_CASE("RunConfig::from_map") {
    SUBCASE("defaults") {
        const RunConfig rc = RunConfig::from_map({});
        CHECK(rc.models.size() == 7);
        CHECK(rc.k_min == 1);
        CHECK(rc.k_max == 9);
        CHECK(rc.features == std::vector<ingest::Feature>{ingest::Feature::distance_miles});
        CHECK(rc.scaling == ingest::Scaling::none);
        CHECK(rc.fit.tol == 1e-8);
        CHECK(rc.threshold_miles == 1.0);
        CHECK(rc.state_median_income == 52407.0);
    }
    SUBCASE("overrides") {
        const RunConfig rc = RunConfig::from_map(
            {{"models", "EEV"},
             {"features", "log_distance_miles,household_size"},
             {"scaling", "zscore"},
             {"k_min", "2"},
             {"k_max", "4"},
             {"seed", "99"}});
        CHECK(rc.models == std::vector<mixture::Parameterization>{
                               mixture::Parameterization::EEV});
        CHECK(rc.features.size() == 2);
        CHECK(rc.scaling == ingest::Scaling::zscore);
        CHECK(rc.fit.seed == 99);
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(RunConfig::from_map({{"k_min", "3"}, {"k_max", "2"}}), DataError);
        CHECK_THROWS_AS(RunConfig::from_map({{"scaling", "weird"}}), DataError);
        CHECK_THROWS_AS(RunConfig::from_map({{"models", "XYZ"}}), DataError);
        CHECK_THROWS_AS(RunConfig::from_map({{"seed", "not_a_number"}}), DataError);
    }
}

TEST_CASE("synth_config_from_map") {
    const synth::SynthConfig base = synth_config_from_map({});
    CHECK(base.n_families == 10000);
    CHECK(base.distance_mixture.size() == 4);

    const synth::SynthConfig two = synth_config_from_map(
        {{"mixture_weights", "0.5,0.5"},
         {"mixture_means", "1.0,10.0"},
         {"mixture_sds", "0.2,2.0"},
         {"n_families", "500"},
         {"box_min_lat", "41.0"}});
    CHECK(two.n_families == 500);
    REQUIRE(two.distance_mixture.size() == 2);
    CHECK(two.distance_mixture[1].mean_miles == 10.0);
    CHECK(two.composition.size() == 2);  // composition tracks the mixture size
    CHECK(two.box.min_lat == 41.0);
    CHECK_NOTHROW(two.validate());

    CHECK_THROWS_AS(synth_config_from_map({{"mixture_weights", "0.5,0.5"},
                                           {"mixture_means", "1.0"},
                                           {"mixture_sds", "0.2,2.0"}}),
                    DataError);
}

TEST_CASE("model document round-trips through JSON") {
    TempDir dir("foodaccess_pipe_model");
    const RunConfig rc = small_run(dir);
    const FitOutcome fit =
        run_fit(rc, mixture::Parameterization::VVV, 3);
    CHECK(std::filesystem::exists(fit.model_path));
    CHECK(std::filesystem::exists(fit.assignments_path));
    CHECK(fit.assignments.size() == 1200);

    const ModelDocument doc = ModelDocument::from_json_file(fit.model_path);
    CHECK(doc.model.K == 3);
    CHECK(doc.model.d == 1);
    // 1-D collapse is recorded in the document.
    CHECK(doc.model.parameterization == mixture::Parameterization::V);
    CHECK_NOTHROW(doc.model.validate());
    CHECK(doc.features == rc.features);
    CHECK(doc.seed == rc.fit.seed);

    // The assignments file has a stamp, a header, and one row per record.
    std::istringstream in(slurp(fit.assignments_path));
    std::string line;
    std::getline(in, line);
    CHECK(line.rfind("# foodaccess 0.1.0 config=", 0) == 0);
    std::getline(in, line);
    CHECK(line == "row_index,cluster");
    long long rows = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 1200);

    SUBCASE("corrupted documents are rejected") {
        const std::string garbled = write_file(dir, "bad.json", "{not json");
        CHECK_THROWS_AS(ModelDocument::from_json_file(garbled), DataError);
        const std::string wrong_version =
            write_file(dir, "v9.json", "{\"format_version\": 9}");
        CHECK_THROWS_AS(ModelDocument::from_json_file(wrong_version), DataError);
        CHECK_THROWS_AS(ModelDocument::from_json_file((dir.path / "no.json").string()),
                        DataError);
    }
}

TEST_CASE("select and profile end to end") {
    TempDir dir("foodaccess_pipe_e2e");
    const RunConfig rc = small_run(dir);
    const SelectOutcome sel = run_select(rc);

    CHECK(std::filesystem::exists(sel.table_csv_path));
    CHECK(std::filesystem::exists(sel.table_json_path));
    CHECK(std::filesystem::exists(sel.model_path));
    CHECK(sel.table.rows.size() == 2 * 4);  // two models, K = 2..5
    CHECK(sel.table.best >= 0);

    // The stored best model reproduces the winning row's shape.
    const ModelDocument best = ModelDocument::from_json_file(sel.model_path);
    CHECK(best.model.K == sel.table.best_row().K);
    CHECK(best.model.parameterization == sel.table.best_row().effective);

    const std::string table_csv = slurp(sel.table_csv_path);
    CHECK(table_csv.rfind("# foodaccess 0.1.0 config=", 0) == 0);
    CHECK(table_csv.find("model,K,bic,converged,silhouette") != std::string::npos);

    const ProfileOutcome prof = run_profile(rc, sel.model_path);
    for (const std::string& p :
         {prof.profile_csv_path, prof.profile_txt_path, prof.quantiles_path,
          prof.gaps_path, prof.deserts_path, prof.geojson_path})
        CHECK(std::filesystem::exists(p));

    // Totals row accounts for every record.
    const std::string profile_csv = slurp(prof.profile_csv_path);
    const std::size_t total_pos = profile_csv.find("\nTotal,");
    REQUIRE(total_pos != std::string::npos);
    std::istringstream total_line(profile_csv.substr(total_pos + 1));
    std::string label, families;
    std::getline(total_line, label, ',');
    std::getline(total_line, families, ',');
    CHECK(std::stoll(families) == 1200);

    // GeoJSON is valid JSON, stamped, with longitude-first coordinates.
    nlohmann::json gj = nlohmann::json::parse(slurp(prof.geojson_path));
    CHECK(gj.at("type") == "FeatureCollection");
    const std::string stamp = gj.at("_meta").at("stamp");
    CHECK(stamp.rfind("foodaccess 0.1.0 config=", 0) == 0);
    long long families_seen = 0, agencies_seen = 0;
    for (const auto& feat : gj.at("features")) {
        const auto& coords = feat.at("geometry").at("coordinates");
        const double lon = coords.at(0), lat = coords.at(1);
        // The synthetic box is lat 40..43, lon -83..-80; swapped axes would
        // land far outside it.
        CHECK(lat > 39.0);
        CHECK(lat < 44.0);
        CHECK(lon > -84.0);
        CHECK(lon < -79.0);
        const auto& props = feat.at("properties");
        if (props.value("kind", "family") == "agency")
            ++agencies_seen;
        else
            ++families_seen;
    }
    CHECK(families_seen == 1200);
    CHECK(agencies_seen == 5);

    SUBCASE("reruns are byte-identical") {
        const std::string csv_before = slurp(sel.table_csv_path);
        const std::string model_before = slurp(sel.model_path);
        const std::string profile_before = slurp(prof.profile_csv_path);
        run_select(rc);
        run_profile(rc, sel.model_path);
        CHECK(slurp(sel.table_csv_path) == csv_before);
        CHECK(slurp(sel.model_path) == model_before);
        CHECK(slurp(prof.profile_csv_path) == profile_before);
    }
}

TEST_CASE("profile rejects a model whose feature spec disagrees with d") {
    TempDir dir("foodaccess_pipe_dim");
    const RunConfig rc = small_run(dir);
    const FitOutcome fit = run_fit(rc, mixture::Parameterization::VVV, 2);

    // Corrupt the document: two declared features against a 1-D model.
    nlohmann::json j = nlohmann::json::parse(slurp(fit.model_path));
    j["feature_spec"].push_back("household_size");
    const std::string broken = write_file(dir, "broken.json", j.dump());

    try {
        run_profile(rc, broken);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("dimension") != std::string::npos);
    }
}
