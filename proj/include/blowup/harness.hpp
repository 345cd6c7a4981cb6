#pragma once

#include "blowup/classifier.hpp"
#include "blowup/errors.hpp"
#include "blowup/physical.hpp"
#include "blowup/shooting.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace blowup {

/// Config rejected; what() lists every offending field as "path: reason".
class ConfigError : public InvalidInput {
public:
    explicit ConfigError(std::vector<std::string> errors);
    const std::vector<std::string>& errors() const { return errors_; }

private:
    std::vector<std::string> errors_;
};

enum class Experiment { Reference, Shoot, Dilation, Classify, KernelSuite, Theorem2Report };

std::string to_string(Experiment e);

struct RunConfig {
    Experiment experiment = Experiment::KernelSuite;
    double p = 3.0;
    int N = 1;
    double grid_half_width = 0.0;   // 0: default grid for N
    int grid_nodes = 0;
    SolverConfig solver;
    VASpec va;

    // reference (also used by shoot, dilation)
    double ref_s0 = 10.0;
    double ref_s_end = 64.0;
    std::string reference_cache;    // load if present, else generate and store

    // shoot
    double shoot_s0 = 10.0;
    double horizon = 40.0;
    double half_width = 2.0;
    int max_outer = 30;
    int sweep_resolution = 3;
    int slice_points = 0;           // > 0: sweep a slice through the shooting solution instead

    // dilation
    double lambda = 2.718281828459045;
    FitWindow dilation_window{30.0, 60.0};

    // classify
    std::string traj_a;
    std::string traj_b;
    FitWindow classify_window{20.0, 37.0};

    // theorem2-report
    std::string traj_u;
    std::string traj_ua;
    BoundOptions bound;
    double T = 1.0;

    std::string output = "out";
    int threads = 1;

    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig load(const std::string& path);
    /// Everything that influences results (not output or threads); keys sorted.
    nlohmann::json to_json() const;
    ModelParams model() const { return ModelParams::make(p, N); }
    GridPtr grid() const;
};

std::uint64_t fnv1a(const std::string& bytes);
std::string config_hash(const RunConfig& c);

struct RunManifest {
    std::string experiment;
    std::string config_hash;
    std::string code_version;
    nlohmann::json config;
    std::map<std::string, double> metrics;
    std::map<std::string, bool> checks;
    std::vector<std::string> files;   // relative to the output directory

    bool passed() const;
    nlohmann::json to_json() const;
    static RunManifest from_json(const nlohmann::json& j);
    static RunManifest load(const std::string& path);
};

inline constexpr const char* kCodeVersion = "blowup 1.0.0";

/// Runs the tagged experiment, writes its artifacts and manifest.json into config.output.
RunManifest run(const RunConfig& config);

/// Exit map of the shoot configuration (lattice, or a slice through the solution).
RunManifest run_sweep(const RunConfig& config);

/// Field-wise comparison; empty when the manifests agree. Throws on experiment mismatch.
std::string diff_runs(const RunManifest& a, const RunManifest& b);

/// Human-readable summary of a manifest.
std::string report(const RunManifest& m);

} // namespace blowup
