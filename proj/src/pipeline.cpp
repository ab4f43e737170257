#include "nrreval/pipeline.hpp"

#include "nrreval/random.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace nrreval
{

namespace
{

constexpr std::uint64_t kSampleStream = 0x5a3b1e;

std::vector<double> average_ranks(std::span<const double> v)
{
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]])
            ++j;
        const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k)
            ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

double pearson(std::span<const double> a, std::span<const double> b)
{
    const auto n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0)
        return 0.0;
    return sab / std::sqrt(saa * sbb);
}

} // namespace

void validate(const SweepConfig& cfg)
{
    if (cfg.d_values.empty())
        throw std::invalid_argument("sweep needs at least one d value");
    for (std::size_t i = 0; i < cfg.d_values.size(); ++i) {
        if (!(cfg.d_values[i] >= 0.0) || !std::isfinite(cfg.d_values[i]))
            throw std::invalid_argument("sweep d values must be finite and non-negative");
        if (i > 0 && !(cfg.d_values[i] > cfg.d_values[i - 1]))
            throw std::invalid_argument("sweep d values must be strictly increasing");
    }
    if (cfg.repeats < 1)
        throw std::invalid_argument("sweep repeats must be >= 1");
    if (cfg.samples < 1)
        throw std::invalid_argument("sample count must be >= 1");
    if (!(cfg.lambda > 0.0))
        throw std::invalid_argument("lambda must be positive");
    if (cfg.n_knots < 1)
        throw std::invalid_argument("knot count must be >= 1");
}

namespace
{

std::uint64_t cell_seed(std::uint64_t seed, std::size_t d_index, int repeat)
{
    return derive_seed(seed, (static_cast<std::uint64_t>(d_index) << 32) | static_cast<std::uint32_t>(repeat));
}

} // namespace

std::uint64_t sweep_warp_seed(std::uint64_t seed, std::size_t d_index, int repeat, std::size_t image)
{
    return derive_seed(cell_seed(seed, d_index, repeat), image);
}

RegisteredSetD perturb_set(const RegisteredSetD& set, double d, int n_knots, std::uint64_t seed,
                           std::vector<CpsWarp>* warps_out)
{
    validate_set(set);
    RegisteredSetD out;
    out.names = set.names;
    if (set.label_maps)
        out.label_maps.emplace();
    for (std::size_t i = 0; i < set.size(); ++i) {
        const CpsWarp warp = make_random_warp(set.dims(), d, n_knots, derive_seed(seed, i));
        const DisplacementField field = displacement_field(warp, set.dims());
        out.images.push_back(apply_warp(set.images[i], field));
        if (set.label_maps)
            out.label_maps->push_back(apply_warp_labels((*set.label_maps)[i], field));
        if (warps_out)
            warps_out->push_back(warp);
    }
    return out;
}

std::vector<SweepRow> run_validation_sweep(const RegisteredSetD& set, const SweepConfig& cfg,
                                           const std::function<void(const SweepRow&)>& on_row)
{
    validate(cfg);
    validate_set(set);
    if (!set.label_maps)
        throw std::invalid_argument("the validation sweep needs label maps");
    if (set.dims().ndim != 2)
        throw std::invalid_argument("the validation sweep needs 2D images");

    const std::uint64_t sample_seed = derive_seed(cfg.seed, kSampleStream);
    std::vector<SweepRow> rows;
    for (std::size_t di = 0; di < cfg.d_values.size(); ++di) {
        for (int rep = 0; rep < cfg.repeats; ++rep) {
            const auto start = std::chrono::steady_clock::now();
            const double d = cfg.d_values[di];
            const RegisteredSetD perturbed = perturb_set(set, d, cfg.n_knots, cell_seed(cfg.seed, di, rep));

            const TextureModelD model = build_model(perturbed, ModePolicy::all());
            const ParameterCloud<double> training = project_set(model, perturbed);
            const ParameterCloud<double> samples = sample_model(model, cfg.samples, sample_seed);
            const auto spec = specificity(training, samples, cfg.lambda, cfg.metric, false);
            const auto overlap =
                generalized_overlap(*perturbed.label_maps, label_weights(*perturbed.label_maps, cfg.weights));

            SweepRow row;
            row.d = d;
            row.repeat = rep;
            row.specificity = spec.value;
            row.std_error = spec.std_error;
            row.overlap = overlap.value;
            row.wall_seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            rows.push_back(row);
            if (on_row)
                on_row(row);
        }
    }
    return rows;
}

EvaluationReport evaluate_registration(const RegisteredSetD& set, const EvaluationConfig& cfg)
{
    validate_set(set);
    const TextureModelD model = build_model(set, cfg.policy);
    const ParameterCloud<double> training = project_set(model, set);
    const ParameterCloud<double> samples = sample_model(model, cfg.samples, derive_seed(cfg.seed, kSampleStream));

    EvaluationReport report;
    report.image_count = static_cast<Eigen::Index>(set.size());
    report.mode_count = model.mode_count();
    report.specificity = specificity(training, samples, cfg.lambda, cfg.metric, false);
    report.generalization = generalization(training, samples, cfg.lambda, cfg.metric, false);
    report.voronoi = voronoi_histogram(training, samples, cfg.metric);
    if (set.label_maps)
        for (const WeightKind kind : cfg.weightings)
            report.overlaps.push_back(generalized_overlap(*set.label_maps, label_weights(*set.label_maps, kind)));
    return report;
}

std::vector<RankEntry> rank_scores(std::span<const double> scores, bool lower_is_better)
{
    std::vector<RankEntry> out(scores.size());
    if (scores.empty())
        return out;
    const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
    const double best = lower_is_better ? *lo : *hi;
    const double worst = lower_is_better ? *hi : *lo;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out[i].score = scores[i];
        int better = 0;
        for (double s : scores)
            if (lower_is_better ? s < scores[i] : s > scores[i])
                ++better;
        out[i].rank = better + 1;
        if (best == worst || scores[i] == best)
            out[i].relative = 100.0;
        else if (scores[i] == worst)
            out[i].relative = 0.0;
        else
            out[i].relative = 100.0 * ((scores[i] - worst) / (best - worst));
    }
    return out;
}

RankingReport rank_registrations(std::span<const RegisteredSetD> sets, const EvaluationConfig& cfg)
{
    if (sets.size() < 2)
        throw std::invalid_argument("ranking needs at least 2 registered sets");
    for (const auto& s : sets) {
        validate_set(s);
        if (s.dims() != sets.front().dims())
            throw std::invalid_argument("grid mismatch across sets: " + to_string(s.dims()) + " vs " +
                                        to_string(sets.front().dims()));
    }
    RankingReport r;
    std::vector<double> spec;
    for (const auto& s : sets) {
        r.reports.push_back(evaluate_registration(s, cfg));
        spec.push_back(r.reports.back().specificity.value);
    }
    r.specificity = rank_scores(spec, true);
    const bool all_labelled =
        std::all_of(sets.begin(), sets.end(), [](const RegisteredSetD& s) { return s.has_labels(); });
    if (all_labelled) {
        for (std::size_t w = 0; w < cfg.weightings.size(); ++w) {
            std::vector<double> ov;
            for (const auto& rep : r.reports)
                ov.push_back(rep.overlaps[w].value);
            r.overlap.push_back(rank_scores(ov, false));
        }
    }
    return r;
}

LineFit fit_line(std::span<const double> x, std::span<const double> y, std::span<const double> d, double d_floor)
{
    if (x.size() != y.size() || x.size() != d.size())
        throw std::invalid_argument("fit_line inputs differ in length");
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (d[i] >= d_floor) {
            xs.push_back(x[i]);
            ys.push_back(y[i]);
        }
    return fit_line(xs, ys);
}

LineFit fit_line(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size())
        throw std::invalid_argument("fit_line inputs differ in length");
    if (x.size() < 3)
        throw std::invalid_argument("fit_line needs at least 3 points, got " + std::to_string(x.size()));
    const auto n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0))
        throw std::invalid_argument("fit_line: x values have zero variance");
    LineFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.correlation = pearson(x, y);
    fit.points = x.size();
    return fit;
}

double spearman(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size() || a.size() < 2)
        throw std::invalid_argument("spearman needs two equal-length series of >= 2 values");
    const auto ra = average_ranks(a);
    const auto rb = average_ranks(b);
    return pearson(ra, rb);
}

std::string format_number(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

void write_specificity_csv(std::ostream& out, const std::string& run_id, const SpecificityResult<double>& r,
                           Eigen::Index samples, Eigen::Index training)
{
    out << "run_id,lambda,metric,M,N,value,std_error\n";
    out << run_id << ',' << format_number(r.lambda) << ',' << to_string(r.metric) << ',' << samples << ','
        << training << ',' << format_number(r.value) << ',' << format_number(r.std_error) << '\n';
}

void write_histogram_csv(std::ostream& out, const VoronoiHistogram& h)
{
    out << "index,count\n";
    for (std::size_t i = 0; i < h.counts.size(); ++i)
        out << i << ',' << h.counts[i] << '\n';
}

void write_overlap_csv(std::ostream& out, const std::vector<OverlapResult>& results)
{
    out << "scheme,label,weight,overlap\n";
    for (const auto& r : results) {
        const char* scheme = to_string(r.scheme.kind);
        for (std::size_t l = 0; l < r.scheme.labels.size(); ++l)
            out << scheme << ',' << r.scheme.labels[l] << ',' << format_number(r.scheme.weights[l]) << ','
                << format_number(r.per_label[l]) << '\n';
        out << scheme << ",generalized,," << format_number(r.value) << '\n';
    }
}

void write_sweep_header(std::ostream& out, bool timing)
{
    out << "d,repeat,specificity,std_error,overlap,note";
    if (timing)
        out << ",wall_seconds";
    out << '\n';
}

void write_sweep_row(std::ostream& out, const SweepRow& row, bool timing)
{
    // Sub-pixel perturbations are dominated by resampling smoothing.
    const char* note = row.d > 0.0 && row.d < 0.5 ? "subpixel" : "";
    out << format_number(row.d) << ',' << row.repeat << ',' << format_number(row.specificity) << ','
        << format_number(row.std_error) << ',' << format_number(row.overlap) << ',' << note;
    if (timing)
        out << ',' << format_number(row.wall_seconds);
    out << '\n';
}

void write_ranking_csv(std::ostream& out, const std::vector<std::string>& set_names, const RankingReport& r,
                       const EvaluationConfig& cfg)
{
    out << "set,measure,score,std_error,rank,relative_rank\n";
    for (std::size_t s = 0; s < r.reports.size(); ++s) {
        const auto& e = r.specificity[s];
        out << set_names[s] << ",specificity," << format_number(e.score) << ','
            << format_number(r.reports[s].specificity.std_error) << ',' << e.rank << ','
            << format_number(e.relative) << '\n';
    }
    for (std::size_t w = 0; w < r.overlap.size(); ++w)
        for (std::size_t s = 0; s < r.reports.size(); ++s) {
            const auto& e = r.overlap[w][s];
            out << set_names[s] << ",overlap-" << to_string(cfg.weightings[w]) << ',' << format_number(e.score)
                << ",," << e.rank << ',' << format_number(e.relative) << '\n';
        }
}

} // namespace nrreval
