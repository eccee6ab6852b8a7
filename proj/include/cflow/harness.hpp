#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cflow/flows.hpp"

namespace cflow {

extern const char* const kCodeVersion;

struct InitialData {
    std::string family = "cosine";  // zero | constant | cosine | sine | soliton | random-smooth
    double value = 0.0;             // constant
    double a = 0.1;                 // cosine / sine amplitude
    int k = 1;                      // cosine / sine wavenumber
    double c = 1.0;                 // soliton speed
    double x0 = 0.0;                // soliton centre
    double radius = 0.05;           // random-smooth: kappa^{-1/2} ||q||
    double decay = 4.0;             // random-smooth
    std::uint64_t seed = 1;
};

struct ExperimentConfig {
    Geometry geometry;
    FlowSpec flow;
    std::vector<double> kappas{2.0, 4.0, 8.0};
    double varkappa = 3.0;
    double s = 0.25;
    InitialData initial;

    // verify / invert-r corpus
    std::string suite = "identities";
    int samples = 20;
    double delta = 0.05;
    std::vector<std::string> geometries;  // empty: the configured geometry only
    double line_period = 16.0;
    std::vector<std::pair<double, double>> pairs{{4, 6}, {8, 3}, {16, 5}};
    std::string sweep = "expansion";       // expansion | remainders | approximation

    std::string out_dir = "out";
    std::map<std::string, double> tolerances;
    double tol_scale = 1.0;
    int jobs = 1;

    std::string source_text;  // raw config file, hashed into the provenance

    double tol(const std::string& name) const;
    // every key after defaults and overrides, sorted
    std::vector<std::pair<std::string, std::string>> resolved() const;
    std::string hash() const;
};

std::map<std::string, double> default_tolerances();

// Throws Error(config) on unreadable or malformed input.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& text);

Field make_initial(const ExperimentConfig& cfg);
Field make_initial(const Geometry& g, const InitialData& d, double kappa);

struct ResultRow {
    std::string experiment;
    std::string params;
    std::string metric;
    double value = 0.0;
    double tolerance = 0.0;
    bool pass = true;
};

// Runs fn(i) for i in [0, n) on up to `jobs` threads; results stay in index order.
template <class T>
std::vector<T> parallel_map(int n, int jobs, const std::function<T(int)>& fn);

std::string provenance_header(const ExperimentConfig& cfg, const std::string& prefix = "# ");
void write_results_csv(const std::string& path, const ExperimentConfig& cfg, const std::vector<ResultRow>& rows);

// Subcommands; each writes into cfg.out_dir and returns the rows it checked.
std::vector<ResultRow> run_evolve(const ExperimentConfig& cfg);
std::vector<ResultRow> run_verify(const ExperimentConfig& cfg);
std::vector<ResultRow> run_sweep_kappa(const ExperimentConfig& cfg);
std::vector<ResultRow> run_invert_r(const ExperimentConfig& cfg);
std::vector<ResultRow> run_equicontinuity(const ExperimentConfig& cfg);
std::vector<ResultRow> run_gauge_check(const ExperimentConfig& cfg);

// Full command line: 0 all checks pass, 1 a check or core routine failed, 2 usage.
int cli_main(int argc, char** argv);

}  // namespace cflow

#include "cflow/detail/parallel.hpp"
