#pragma once

#include "forced_osc/cutoff.hpp"
#include "forced_osc/expr.hpp"
#include "forced_osc/gallery.hpp"
#include "forced_osc/orbit.hpp"
#include "forced_osc/segment.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace forced_osc {

inline constexpr int kSchemaVersion = 1;

/// Names accepted by `system.gallery`.
const std::vector<std::string>& gallery_names();
/// Stage names accepted by `pipeline`, in canonical order.
const std::vector<std::string>& stage_names();

enum class SegmentSource { None, Pendulum, Barriers, VerticalTangents, PolarCap, Ball };

struct VerifyStage {
    int samples = 2000;
    bool growth = true;
    int barrier_samples = 256;
};

struct SelectPStage {
    std::vector<double> schedule;
    EscapeConfig escape;
};

struct FindOrbitsStage {
    MultistartConfig search;
    int min_orbits = 1;
    std::optional<int> expect_orbits;
    double recheck_tol = 1e-12;
};

struct IndexStage {
    double collar = 0.05;
    int points = 64;
    double tol = 1e-10;
};

struct LemmaStage {
    Vec q0, qd0;
    double t_geo = 1.0;
    std::vector<double> lambdas;
    std::optional<Expr> expected;  // in the variable `lambda`
    double tol = 1e-6;
    bool decreasing = false;
    int n_dense = 2000;
};

struct EscapeBoundStage {
    double delta = 0.05;
    int points = 100;
    int directions = 32;
    std::optional<double> tau_max;
};

/// A validated scenario with its system and segment already constructed.
struct Scenario {
    std::string path;
    std::string name;
    std::uint64_t seed = 1;
    std::string output_dir;
    std::string gallery;

    SystemSpec system;
    SegmentSource segment_source = SegmentSource::None;
    std::optional<PeriodicSegment> segment;
    std::vector<BarrierPair> barriers;
    std::optional<ChainSpec> chain;
    std::optional<CutoffProfile> cutoff;

    std::vector<std::string> pipeline;
    VerifyStage verify;
    SelectPStage select;
    FindOrbitsStage find;
    IndexStage index;
    LemmaStage lemma;
    EscapeBoundStage escape_bound;

    std::vector<std::string> warnings;

    /// The system the exit faces are classified against: the cutoff-modified
    /// one for barrier and metric-ball segments, the original otherwise.
    SystemSpec face_system() const;
};

/// Reads a YAML scenario file.  Unknown keys raise Error(ParseError) when
/// `strict`, otherwise they are recorded in Scenario::warnings.  Every
/// semantic violation found is listed in one Error(ValidationError).
Scenario parse_scenario(const std::string& path, bool strict = false);

struct RunOptions {
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<double> tol;
    int jobs = 1;
    /// Restricts the pipeline to these stages (empty: the whole pipeline).
    std::vector<std::string> only;
    /// Treat "verified segment, nonzero index, no orbit" as a failure.
    bool contradiction_check = true;
};

struct FailureRecord {
    std::string stage;
    std::string kind;
    std::string message;
};

struct RunResult {
    int exit_code = 0;
    std::vector<FailureRecord> failures;
    std::string out_dir;
};

/// Executes the pipeline and writes report.json, manifest.txt and the stage
/// CSV files into the output directory.
RunResult run_scenario(Scenario scenario, const RunOptions& options);

}  // namespace forced_osc
