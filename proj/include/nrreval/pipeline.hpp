#ifndef NRREVAL_PIPELINE_HPP
#define NRREVAL_PIPELINE_HPP

#include "nrreval/cps_warp.hpp"
#include "nrreval/overlap.hpp"
#include "nrreval/specificity.hpp"
#include "nrreval/texture_model.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nrreval
{

// ---------------------------------------------------------------------------
// Validation sweep: perturb a registered set with random CPS warps of growing
// mean displacement and record specificity against generalized overlap.
// ---------------------------------------------------------------------------

struct SweepConfig
{
    std::vector<double> d_values;
    int repeats = 1;
    Eigen::Index samples = 50'000;
    double lambda = 1.0;
    Metric metric = Metric::l2;
    std::uint64_t seed = 0;
    WeightKind weights = WeightKind::complexity;
    int n_knots = kDefaultKnotCount;
};

/// Throws std::invalid_argument unless d_values are non-negative and strictly increasing,
/// repeats >= 1 and samples >= 1.
void validate(const SweepConfig& cfg);

struct SweepRow
{
    double d = 0.0;
    int repeat = 0;
    double specificity = 0.0;
    double std_error = 0.0;
    double overlap = 0.0;
    double wall_seconds = 0.0;
};

/// Seed of the warp applied to image `image` in sweep cell (d index, repeat).
std::uint64_t sweep_warp_seed(std::uint64_t seed, std::size_t d_index, int repeat, std::size_t image);

/// Warps every image (and label map) of `set` with its own random CPS warp of mean
/// displacement d. Warp i uses seed derive_seed(seed, i).
RegisteredSetD perturb_set(const RegisteredSetD& set, double d, int n_knots, std::uint64_t seed,
                           std::vector<CpsWarp>* warps_out = nullptr);

/// Runs every (d, repeat) cell in order. `on_row` sees each completed row, so rows produced
/// before a failure have already been delivered when the exception propagates.
std::vector<SweepRow> run_validation_sweep(const RegisteredSetD& set, const SweepConfig& cfg,
                                           const std::function<void(const SweepRow&)>& on_row = {});

// ---------------------------------------------------------------------------
// Registration evaluation and ranking.
// ---------------------------------------------------------------------------

struct EvaluationConfig
{
    Eigen::Index samples = 50'000;
    double lambda = 1.0;
    Metric metric = Metric::l1;
    std::uint64_t seed = 0;
    std::vector<WeightKind> weightings{WeightKind::inverse_volume, WeightKind::inverse_volume_complexity};
    ModePolicy policy = ModePolicy::all();
};

struct EvaluationReport
{
    Eigen::Index image_count = 0;
    Eigen::Index mode_count = 0;
    SpecificityResult<double> specificity;
    SpecificityResult<double> generalization;
    VoronoiHistogram voronoi;
    std::vector<OverlapResult> overlaps; // one per requested weighting; empty without labels
};

EvaluationReport evaluate_registration(const RegisteredSetD& set, const EvaluationConfig& cfg);

struct RankEntry
{
    double score = 0.0;
    int rank = 0;           // 1 = best
    double relative = 0.0;  // best 100, worst 0, linear in between
};

/// Ranks scores; ties share the lower rank. All-equal scores are all 100%.
std::vector<RankEntry> rank_scores(std::span<const double> scores, bool lower_is_better);

struct RankingReport
{
    std::vector<EvaluationReport> reports;
    std::vector<RankEntry> specificity;
    std::vector<std::vector<RankEntry>> overlap; // per weighting, when every set has labels
};

/// Evaluates each set with the same configuration and ranks them (lower specificity and
/// higher overlap are better). Needs at least two sets on one grid.
RankingReport rank_registrations(std::span<const RegisteredSetD> sets, const EvaluationConfig& cfg);

// ---------------------------------------------------------------------------
// Straight-line fit of specificity against overlap.
// ---------------------------------------------------------------------------

struct LineFit
{
    double slope = 0.0;
    double intercept = 0.0;
    double correlation = 0.0;
    std::size_t points = 0;
};

/// Ordinary least squares y = slope * x + intercept over points with d >= d_floor, plus
/// Pearson correlation. Needs >= 3 such points and non-zero x variance.
LineFit fit_line(std::span<const double> x, std::span<const double> y, std::span<const double> d, double d_floor);
LineFit fit_line(std::span<const double> x, std::span<const double> y);

/// Spearman rank correlation (average ranks for ties).
double spearman(std::span<const double> a, std::span<const double> b);

// ---------------------------------------------------------------------------
// CSV reports. Every writer emits its header row; numbers use %.12g.
// ---------------------------------------------------------------------------

std::string format_number(double v);

/// run_id,lambda,metric,M,N,value,std_error
void write_specificity_csv(std::ostream& out, const std::string& run_id, const SpecificityResult<double>& r,
                           Eigen::Index samples, Eigen::Index training);
/// index,count
void write_histogram_csv(std::ostream& out, const VoronoiHistogram& h);
/// scheme,label,weight,overlap: one row per label, then label "generalized" with the overall value.
void write_overlap_csv(std::ostream& out, const std::vector<OverlapResult>& results);
/// d,repeat,specificity,std_error,overlap,note[,wall_seconds]
void write_sweep_header(std::ostream& out, bool timing);
void write_sweep_row(std::ostream& out, const SweepRow& row, bool timing);
/// set,measure,score,std_error,rank,relative_rank
void write_ranking_csv(std::ostream& out, const std::vector<std::string>& set_names, const RankingReport& r,
                       const EvaluationConfig& cfg);

} // namespace nrreval

#endif // NRREVAL_PIPELINE_HPP
