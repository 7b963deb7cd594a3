#include "foodaccess/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "foodaccess/geo.hpp"
#include "foodaccess/profile.hpp"
#include "foodaccess/rng.hpp"
#include "json.hpp"

namespace foodaccess::pipeline {

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path);
    return out;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else if (c != ' ') {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

std::string get(const std::map<std::string, std::string>& kv, const std::string& key,
                const std::string& fallback) {
    auto it = kv.find(key);
    return it == kv.end() ? fallback : it->second;
}

double get_double(const std::map<std::string, std::string>& kv, const std::string& key,
                  double fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    try {
        return std::stod(it->second);
    } catch (const std::exception&) {
        throw DataError("config key '" + key + "': not a number: " + it->second);
    }
}

long long get_int(const std::map<std::string, std::string>& kv, const std::string& key,
                  long long fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    try {
        return std::stoll(it->second);
    } catch (const std::exception&) {
        throw DataError("config key '" + key + "': not an integer: " + it->second);
    }
}

}  // namespace

std::map<std::string, std::string> parse_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos) continue;
        if (line[start] == '#') continue;
        const std::size_t eq = line.find('=', start);
        if (eq == std::string::npos)
            throw DataError("config line is not key=value: " + line);
        std::string key = line.substr(start, eq - start);
        std::string value = line.substr(eq + 1);
        auto trim = [](std::string& s) {
            const std::size_t a = s.find_first_not_of(" \t");
            const std::size_t b = s.find_last_not_of(" \t");
            s = a == std::string::npos ? "" : s.substr(a, b - a + 1);
        };
        trim(key);
        trim(value);
        kv[key] = value;
    }
    return kv;
}

std::uint64_t config_hash(const std::map<std::string, std::string>& kv) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& [k, v] : kv) {
        mix(k);
        mix("=");
        mix(v);
        mix("\n");
    }
    return h;
}

RunConfig RunConfig::from_map(const std::map<std::string, std::string>& kv) {
    RunConfig rc;
    rc.services_path = get(kv, "services", "");
    rc.agencies_path = get(kv, "agencies", "");
    rc.income_path = get(kv, "tract_income", "");

    for (const auto& f : split_list(get(kv, "features", "distance_miles")))
        rc.features.push_back(ingest::feature_from_string(f));
    rc.features.erase(rc.features.begin());  // drop default once overridden
    if (rc.features.empty()) throw DataError("config: empty features list");

    const std::string scaling = get(kv, "scaling", "none");
    if (scaling == "none") rc.scaling = ingest::Scaling::none;
    else if (scaling == "zscore") rc.scaling = ingest::Scaling::zscore;
    else throw DataError("config: unknown scaling: " + scaling);

    const std::string models = get(kv, "models", "EII,VII,EEI,VVI,EEE,EEV,VVV");
    for (const auto& m : split_list(models))
        rc.models.push_back(mixture::parameterization_from_string(m));

    rc.k_min = static_cast<int>(get_int(kv, "k_min", 1));
    rc.k_max = static_cast<int>(get_int(kv, "k_max", 9));
    if (rc.k_min < 1 || rc.k_max < rc.k_min)
        throw DataError("config: invalid K range");

    rc.fit.tol = get_double(kv, "tol", 1e-8);
    rc.fit.max_iter = static_cast<int>(get_int(kv, "max_iter", 500));
    rc.fit.n_restarts = static_cast<int>(get_int(kv, "restarts", 5));
    rc.fit.seed = static_cast<std::uint64_t>(get_int(kv, "seed", 0));
    rc.fit.cov_floor_scale = get_double(kv, "cov_floor_scale", 1e-6);

    rc.threshold_miles = get_double(kv, "threshold_miles", 1.0);
    rc.state_median_income = get_double(kv, "state_median_income", 52407.0);
    rc.silhouette_sample_size =
        static_cast<int>(get_int(kv, "silhouette_sample", 10000));
    rc.out_dir = get(kv, "outdir", "out");
    rc.threads = static_cast<int>(get_int(kv, "threads", 0));
    rc.hash = config_hash(kv);
    return rc;
}

std::string RunConfig::stamp() const {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "foodaccess %s config=%016llx seed=%llu", kVersion,
                  static_cast<unsigned long long>(hash),
                  static_cast<unsigned long long>(fit.seed));
    return buf;
}

std::string ModelDocument::to_json(const std::string& stamp) const {
    nlohmann::json j;
    j["format_version"] = 1;
    j["stamp"] = stamp;
    j["parameterization"] = mixture::to_string(model.parameterization);
    j["K"] = model.K;
    j["d"] = model.d;
    j["weights"] = std::vector<double>(model.weights.data(),
                                       model.weights.data() + model.weights.size());
    auto means = nlohmann::json::array();
    for (int k = 0; k < model.K; ++k) {
        std::vector<double> row(model.d);
        for (int c = 0; c < model.d; ++c) row[static_cast<std::size_t>(c)] = model.means(k, c);
        means.push_back(row);
    }
    j["means"] = means;
    auto covs = nlohmann::json::array();
    for (const auto& cov : model.covariances) {
        std::vector<double> flat;  // row-major
        for (int r = 0; r < cov.rows(); ++r)
            for (int c = 0; c < cov.cols(); ++c) flat.push_back(cov(r, c));
        covs.push_back(flat);
    }
    j["covariances"] = covs;
    std::vector<std::string> feats;
    for (auto f : features) feats.push_back(ingest::to_string(f));
    j["feature_spec"] = feats;
    j["scaling"] = scaling == ingest::Scaling::zscore ? "zscore" : "none";
    j["scaling_mean"] = scaling_mean;
    j["scaling_sd"] = scaling_sd;
    j["seed"] = seed;
    j["config"] = {{"tol", fit_config.tol},
                   {"max_iter", fit_config.max_iter},
                   {"n_restarts", fit_config.n_restarts},
                   {"cov_floor_scale", fit_config.cov_floor_scale}};
    return j.dump(2);
}

ModelDocument ModelDocument::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open model file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("model file is not valid JSON: " + std::string(e.what()));
    }
    if (j.value("format_version", 0) != 1)
        throw DataError("unsupported model format_version");

    ModelDocument doc;
    doc.model.parameterization =
        mixture::parameterization_from_string(j.at("parameterization"));
    doc.model.K = j.at("K");
    doc.model.d = j.at("d");
    const auto weights = j.at("weights").get<std::vector<double>>();
    doc.model.weights = Eigen::Map<const Eigen::VectorXd>(
        weights.data(), static_cast<Eigen::Index>(weights.size()));
    doc.model.means = Eigen::MatrixXd(doc.model.K, doc.model.d);
    for (int k = 0; k < doc.model.K; ++k) {
        const auto row = j.at("means").at(k).get<std::vector<double>>();
        for (int c = 0; c < doc.model.d; ++c)
            doc.model.means(k, c) = row.at(static_cast<std::size_t>(c));
    }
    for (int k = 0; k < doc.model.K; ++k) {
        const auto flat = j.at("covariances").at(k).get<std::vector<double>>();
        Eigen::MatrixXd cov(doc.model.d, doc.model.d);
        for (int r = 0; r < doc.model.d; ++r)
            for (int c = 0; c < doc.model.d; ++c)
                cov(r, c) = flat.at(static_cast<std::size_t>(r * doc.model.d + c));
        doc.model.covariances.push_back(std::move(cov));
    }
    for (const auto& f : j.at("feature_spec").get<std::vector<std::string>>())
        doc.features.push_back(ingest::feature_from_string(f));
    doc.scaling = j.value("scaling", "none") == "zscore" ? ingest::Scaling::zscore
                                                         : ingest::Scaling::none;
    doc.scaling_mean = j.value("scaling_mean", std::vector<double>{});
    doc.scaling_sd = j.value("scaling_sd", std::vector<double>{});
    doc.seed = j.value("seed", 0ULL);
    if (j.contains("config")) {
        doc.fit_config.tol = j["config"].value("tol", 1e-8);
        doc.fit_config.max_iter = j["config"].value("max_iter", 500);
        doc.fit_config.n_restarts = j["config"].value("n_restarts", 5);
        doc.fit_config.cov_floor_scale = j["config"].value("cov_floor_scale", 1e-6);
    }
    doc.model.validate();
    return doc;
}

synth::SynthConfig synth_config_from_map(const std::map<std::string, std::string>& kv) {
    synth::SynthConfig cfg;
    cfg.n_families = get_int(kv, "n_families", cfg.n_families);
    cfg.n_agencies = static_cast<int>(get_int(kv, "n_agencies", cfg.n_agencies));
    cfg.n_tracts = static_cast<int>(get_int(kv, "n_tracts", cfg.n_tracts));
    cfg.seed = static_cast<std::uint64_t>(get_int(kv, "seed", static_cast<long long>(cfg.seed)));
    cfg.income_median = get_double(kv, "income_median", cfg.income_median);
    cfg.income_log_sd = get_double(kv, "income_log_sd", cfg.income_log_sd);
    cfg.state_median_income = get_double(kv, "state_median_income", cfg.state_median_income);
    cfg.box.min_lat = get_double(kv, "box_min_lat", cfg.box.min_lat);
    cfg.box.max_lat = get_double(kv, "box_max_lat", cfg.box.max_lat);
    cfg.box.min_lon = get_double(kv, "box_min_lon", cfg.box.min_lon);
    cfg.box.max_lon = get_double(kv, "box_max_lon", cfg.box.max_lon);

    const std::string weights = get(kv, "mixture_weights", "");
    const std::string means = get(kv, "mixture_means", "");
    const std::string sds = get(kv, "mixture_sds", "");
    if (!weights.empty() || !means.empty() || !sds.empty()) {
        const auto w = split_list(weights);
        const auto m = split_list(means);
        const auto s = split_list(sds);
        if (w.size() != m.size() || m.size() != s.size() || w.empty())
            throw DataError("config: mixture_weights/means/sds must have equal lengths");
        cfg.distance_mixture.clear();
        for (std::size_t i = 0; i < w.size(); ++i)
            cfg.distance_mixture.push_back(
                {std::stod(w[i]), std::stod(m[i]), std::stod(s[i])});
        // Household composition interpolates between the defaults when the
        // component count changes.
        if (cfg.composition.size() != cfg.distance_mixture.size()) {
            std::vector<synth::CompositionMeans> comp;
            for (std::size_t i = 0; i < cfg.distance_mixture.size(); ++i) {
                const double t = cfg.distance_mixture.size() == 1
                                     ? 0.0
                                     : static_cast<double>(i) /
                                           (cfg.distance_mixture.size() - 1);
                comp.push_back({1.12 + t * (1.38 - 1.12), 0.62 + t * (0.82 - 0.62),
                                0.61 + t * (0.61 - 0.61)});
            }
            cfg.composition = comp;
        }
    }
    return cfg;
}

SynthOutcome run_synth(const synth::SynthConfig& config, const std::string& out_dir,
                       const std::string& stamp) {
    std::filesystem::create_directories(out_dir);
    const synth::SynthResult r = synth::generate(config, out_dir, stamp);
    return {{r.services_path, r.agencies_path, r.tract_income_path, r.ground_truth_path}};
}

namespace {

struct LoadedRun {
    ingest::Dataset dataset;
    ingest::FeatureMatrix features;
};

LoadedRun load_run(const RunConfig& rc) {
    LoadedRun run;
    run.dataset =
        ingest::load_tables(rc.services_path, rc.agencies_path, rc.income_path);
    run.features = ingest::featurize(run.dataset, rc.features, rc.scaling);
    return run;
}

ModelDocument document_from_fit(const RunConfig& rc, const ingest::FeatureMatrix& fm,
                                const mixture::FitResult& fr) {
    ModelDocument doc;
    doc.model = fr.model;
    doc.features = fm.spec;
    doc.scaling = fm.scaling;
    doc.scaling_mean = fm.col_mean;
    doc.scaling_sd = fm.col_sd;
    doc.seed = rc.fit.seed;
    doc.fit_config = rc.fit;
    return doc;
}

// Applies the stored scaling to a freshly computed raw feature matrix.
Eigen::MatrixXd apply_stored_scaling(const ModelDocument& doc, Eigen::MatrixXd X) {
    if (doc.scaling != ingest::Scaling::zscore) return X;
    for (int j = 0; j < X.cols(); ++j)
        X.col(j) = (X.col(j).array() - doc.scaling_mean[static_cast<std::size_t>(j)]) /
                   doc.scaling_sd[static_cast<std::size_t>(j)];
    return X;
}

}  // namespace

SelectOutcome run_select(const RunConfig& rc) {
    std::filesystem::create_directories(rc.out_dir);
    LoadedRun run = load_run(rc);

    std::vector<int> k_range;
    for (int k = rc.k_min; k <= rc.k_max; ++k) k_range.push_back(k);
    selection::GridOptions opts;
    opts.silhouette_sample_size = rc.silhouette_sample_size;
    selection::SelectionTable table =
        selection::grid_search(run.features.X, k_range, rc.models, rc.fit, opts);

    SelectOutcome out;
    out.table_csv_path = rc.out_dir + "/selection_table.csv";
    out.table_json_path = rc.out_dir + "/selection_table.json";
    out.model_path = rc.out_dir + "/best_model.json";
    {
        auto f = open_out(out.table_csv_path);
        f << "# " << rc.stamp() << "\n" << table.to_csv();
    }
    {
        auto f = open_out(out.table_json_path);
        f << table.to_json() << "\n";
    }

    // Refit the winning cell to obtain the serialized model.
    const selection::SelectionRow& best = table.best_row();
    mixture::FitConfig cell = rc.fit;
    cell.seed = Rng::derive(rc.fit.seed,
                            static_cast<std::uint64_t>(static_cast<int>(best.effective)) *
                                    1009 +
                                best.K);
    mixture::FitResult fr = mixture::fit(run.features.X, best.K, best.effective, cell);
    {
        auto f = open_out(out.model_path);
        f << document_from_fit(rc, run.features, fr).to_json(rc.stamp()) << "\n";
    }
    out.table = std::move(table);
    return out;
}

FitOutcome run_fit(const RunConfig& rc, mixture::Parameterization model, int K) {
    std::filesystem::create_directories(rc.out_dir);
    LoadedRun run = load_run(rc);
    mixture::FitResult fr = mixture::fit(run.features.X, K, model, rc.fit);

    FitOutcome out;
    out.model_path = rc.out_dir + "/model.json";
    out.assignments_path = rc.out_dir + "/assignments.csv";
    {
        auto f = open_out(out.model_path);
        f << document_from_fit(rc, run.features, fr).to_json(rc.stamp()) << "\n";
    }
    {
        auto f = open_out(out.assignments_path);
        f << "# " << rc.stamp() << "\nrow_index,cluster\n";
        for (std::size_t i = 0; i < fr.hard_assignments.size(); ++i)
            f << i << ',' << fr.hard_assignments[i] << '\n';
    }
    out.assignments = fr.hard_assignments;
    return out;
}

ProfileOutcome run_profile(const RunConfig& rc, const std::string& model_path) {
    std::filesystem::create_directories(rc.out_dir);
    const ModelDocument doc = ModelDocument::from_json_file(model_path);

    ingest::Dataset dataset =
        ingest::load_tables(rc.services_path, rc.agencies_path, rc.income_path);
    ingest::FeatureMatrix raw =
        ingest::featurize(dataset, doc.features, ingest::Scaling::none);
    if (static_cast<int>(doc.features.size()) != doc.model.d)
        throw DataError("model dimension mismatch: features d=" +
                        std::to_string(doc.features.size()) + ", model d=" +
                        std::to_string(doc.model.d));
    const Eigen::MatrixXd X = apply_stored_scaling(doc, std::move(raw.X));

    auto [assignments, posterior] = mixture::predict(doc.model, X);
    (void)posterior;

    const std::vector<double> distances = ingest::assigned_distances(dataset);
    const profile::ClusterLabeling labeling =
        profile::label_clusters(assignments, distances, doc.model.K);
    const geo::SpatialGrid grid(dataset.agency_grid_entries(),
                                std::max(1.0, rc.threshold_miles));

    profile::ProfileConfig pcfg;
    pcfg.threshold_miles = rc.threshold_miles;
    pcfg.state_median_income = rc.state_median_income;
    const profile::ClusterProfile prof =
        profile::build_profile(assignments, dataset, distances, grid, labeling, pcfg);
    const profile::QuantileTable quant =
        profile::distance_quantiles(assignments, distances, labeling);
    const profile::ClusterGaps gaps =
        profile::cluster_gaps(assignments, distances, labeling);
    const profile::DesertReport deserts =
        profile::desert_report(dataset.records, grid, rc.threshold_miles);

    ProfileOutcome out;
    out.profile_csv_path = rc.out_dir + "/profile.csv";
    out.profile_txt_path = rc.out_dir + "/profile.txt";
    out.quantiles_path = rc.out_dir + "/quantiles.csv";
    out.gaps_path = rc.out_dir + "/gaps.csv";
    out.deserts_path = rc.out_dir + "/deserts.csv";
    out.geojson_path = rc.out_dir + "/clusters.geojson";

    {
        auto f = open_out(out.profile_csv_path);
        f << "# " << rc.stamp() << "\n" << prof.to_csv();
    }
    {
        auto f = open_out(out.profile_txt_path);
        f << "# " << rc.stamp() << "\n" << prof.to_text();
    }
    {
        auto f = open_out(out.quantiles_path);
        f << "# " << rc.stamp() << "\n" << quant.to_csv();
    }
    {
        auto f = open_out(out.gaps_path);
        f << "# " << rc.stamp() << "\n" << gaps.to_csv(labeling);
    }
    {
        auto f = open_out(out.deserts_path);
        f << "# " << rc.stamp() << "\n" << deserts.to_csv();
    }

    // GeoJSON is streamed (600k features would be heavy as an in-memory
    // document). RFC 7946: coordinates are [longitude, latitude].
    {
        auto f = open_out(out.geojson_path);
        f << "{\n\"type\": \"FeatureCollection\",\n\"_meta\": {\"stamp\": \""
          << rc.stamp() << "\"},\n\"features\": [";
        bool first = true;
        auto feature = [&](double lon, double lat, const std::string& props) {
            f << (first ? "\n" : ",\n");
            first = false;
            char coords[64];
            std::snprintf(coords, sizeof(coords), "[%.10f, %.10f]", lon, lat);
            f << "{\"type\": \"Feature\", \"geometry\": {\"type\": \"Point\", "
                 "\"coordinates\": "
              << coords << "}, \"properties\": " << props << "}";
        };
        for (std::size_t i = 0; i < dataset.records.size(); ++i) {
            const auto& r = dataset.records[i];
            nlohmann::json props;
            props["cluster_label"] =
                labeling.label_by_component[static_cast<std::size_t>(assignments[i])];
            props["distance_miles"] = distances[i];
            props["tract_id"] = r.tract_id;
            feature(r.longitude_deg, r.latitude_deg, props.dump());
        }
        for (const auto& a : dataset.agencies) {
            nlohmann::json props;
            props["kind"] = "agency";
            props["agency_id"] = a.agency_id;
            feature(a.longitude_deg, a.latitude_deg, props.dump());
        }
        f << "\n]\n}\n";
    }
    return out;
}

}  // namespace foodaccess::pipeline
