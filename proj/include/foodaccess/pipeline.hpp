#pragma once

#include <map>
#include <string>
#include <vector>

#include "foodaccess/ingest.hpp"
#include "foodaccess/mixture.hpp"
#include "foodaccess/selection.hpp"
#include "foodaccess/synth.hpp"

namespace foodaccess::pipeline {

inline constexpr const char* kVersion = "0.1.0";

// Flat key=value config document; '#' lines are comments. Later duplicate
// keys win, which is how flag overrides are applied.
std::map<std::string, std::string> parse_kv_file(const std::string& path);

// FNV-1a over the canonical (sorted) key=value text.
std::uint64_t config_hash(const std::map<std::string, std::string>& kv);

struct RunConfig {
    std::string services_path;
    std::string agencies_path;
    std::string income_path;
    std::vector<ingest::Feature> features = {ingest::Feature::distance_miles};
    ingest::Scaling scaling = ingest::Scaling::none;
    std::vector<mixture::Parameterization> models;
    int k_min = 1;
    int k_max = 9;
    mixture::FitConfig fit;
    double threshold_miles = 1.0;
    double state_median_income = 52407.0;
    int silhouette_sample_size = 10000;
    std::string out_dir = "out";
    int threads = 0;  // 0 = library default

    std::uint64_t hash = 0;  // of the merged key/value map

    static RunConfig from_map(const std::map<std::string, std::string>& kv);
    std::string stamp() const;
};

// Trained-model document (versioned JSON; schema documented in README).
struct ModelDocument {
    mixture::MixtureModel model;
    std::vector<ingest::Feature> features;
    ingest::Scaling scaling = ingest::Scaling::none;
    std::vector<double> scaling_mean;
    std::vector<double> scaling_sd;
    std::uint64_t seed = 0;
    mixture::FitConfig fit_config;

    std::string to_json(const std::string& stamp) const;
    static ModelDocument from_json_file(const std::string& path);
};

synth::SynthConfig synth_config_from_map(const std::map<std::string, std::string>& kv);

struct SynthOutcome {
    std::vector<std::string> paths;
};
SynthOutcome run_synth(const synth::SynthConfig& config, const std::string& out_dir,
                       const std::string& stamp);

struct SelectOutcome {
    selection::SelectionTable table;
    std::string table_csv_path;
    std::string table_json_path;
    std::string model_path;
};
SelectOutcome run_select(const RunConfig& rc);

struct FitOutcome {
    std::string model_path;
    std::string assignments_path;
    std::vector<int> assignments;
};
FitOutcome run_fit(const RunConfig& rc, mixture::Parameterization model, int K);

struct ProfileOutcome {
    std::string profile_csv_path;
    std::string profile_txt_path;
    std::string quantiles_path;
    std::string gaps_path;
    std::string deserts_path;
    std::string geojson_path;
};
ProfileOutcome run_profile(const RunConfig& rc, const std::string& model_path);

}  // namespace foodaccess::pipeline
