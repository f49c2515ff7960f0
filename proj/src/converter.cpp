#include "annsnn/converter.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "annsnn/errors.hpp"
#include "annsnn/rng.hpp"

namespace annsnn {

namespace {

double parse_number(const std::string& s, const std::string& context)
{
    double v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
        throw ConfigError("cannot read '" + s + "' as a number in " + context);
    }
    return v;
}

std::string format_g(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

std::string format_full(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

InitStrategy InitStrategy::constant(double c)
{
    InitStrategy s{Kind::constant_fraction};
    s.fraction = c;
    return s;
}

InitStrategy InitStrategy::uniform(std::uint64_t seed)
{
    InitStrategy s{Kind::uniform_random};
    s.seed = seed;
    return s;
}

InitStrategy InitStrategy::gaussian(double mu, double sigma, std::uint64_t seed)
{
    InitStrategy s{Kind::gaussian_random};
    s.mu = mu;
    s.sigma = sigma;
    s.seed = seed;
    return s;
}

InitStrategy InitStrategy::parse(const std::string& text, std::uint64_t seed)
{
    InitStrategy s;
    if (text == "zero") {
        s = zero();
    } else if (text == "half") {
        s = optimal_half();
    } else if (text.rfind("const:", 0) == 0) {
        s = constant(parse_number(text.substr(6), "--init " + text));
    } else if (text == "uniform") {
        s = uniform(seed);
    } else if (text == "gauss") {
        s = gaussian(0.5, 0.2, seed);
    } else if (text.rfind("gauss:", 0) == 0) {
        const std::string args = text.substr(6);
        const auto comma = args.find(',');
        if (comma == std::string::npos) {
            throw ConfigError("--init gauss expects gauss:<mu>,<sigma>");
        }
        s = gaussian(parse_number(args.substr(0, comma), "--init " + text),
                     parse_number(args.substr(comma + 1), "--init " + text), seed);
    } else {
        throw ConfigError("unknown init strategy '" + text + "' (zero|half|const:<c>|uniform|gauss:<mu>,<sigma>)");
    }
    s.validate();
    return s;
}

std::string InitStrategy::label() const
{
    switch (kind) {
    case Kind::zero: return "zero";
    case Kind::optimal_half: return "half";
    case Kind::constant_fraction: return "const:" + format_g(fraction);
    case Kind::uniform_random: return "uniform";
    case Kind::gaussian_random: return "gauss:" + format_g(mu) + "," + format_g(sigma);
    }
    return "unknown";
}

void InitStrategy::validate() const
{
    if (kind == Kind::constant_fraction && !(fraction >= 0.0 && fraction <= 1.0)) {
        throw ConfigError("constant init fraction must lie in [0,1]");
    }
    if (kind == Kind::gaussian_random && !(std::isfinite(mu) && sigma > 0.0 && std::isfinite(sigma))) {
        throw ConfigError("gaussian init needs a finite mean and positive sigma");
    }
}

ThresholdMode ThresholdMode::parse(const std::string& text)
{
    if (text == "clip") {
        return trained_clip();
    }
    if (text == "percentile") {
        return data_percentile(99.9);
    }
    if (text.rfind("percentile:", 0) == 0) {
        const double p = parse_number(text.substr(11), "--threshold " + text);
        if (!(p > 0.0 && p <= 100.0)) {
            throw ConfigError("percentile must lie in (0,100]");
        }
        return data_percentile(p);
    }
    throw ConfigError("unknown threshold mode '" + text + "' (clip|percentile:<p>)");
}

std::string ThresholdMode::label() const
{
    return kind == Kind::trained_clip ? "clip" : "percentile:" + format_g(percentile);
}

void ConversionReport::write_csv(std::ostream& out) const
{
    out << "layer,threshold,init_mean,init_min,init_max,threshold_mode,init_strategy\n";
    for (const LayerConversion& l : layers) {
        out << l.layer << ',' << format_full(l.threshold) << ',' << format_full(l.init_mean) << ','
            << format_full(l.init_min) << ',' << format_full(l.init_max) << ',' << threshold_mode << ','
            << init_strategy << '\n';
    }
}

double nearest_rank_percentile(std::vector<double> values, double p)
{
    if (values.empty()) {
        throw ConfigError("percentile of an empty sample");
    }
    if (!(p > 0.0 && p <= 100.0)) {
        throw ConfigError("percentile must lie in (0,100]");
    }
    const double rank = std::ceil(p / 100.0 * static_cast<double>(values.size()));
    const std::size_t k = std::clamp<std::size_t>(static_cast<std::size_t>(rank), 1, values.size()) - 1;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k), values.end());
    return values[k];
}

namespace {

std::vector<double> percentile_thresholds(const AnnNetwork& ann, const Dataset& calib, double p)
{
    if (calib.size() == 0) {
        throw ConfigError("percentile thresholds need a non-empty calibration set");
    }
    if (calib.sample_shape() != ann.topology.input_shape) {
        throw DimensionError("calibration samples " + shape_to_string(calib.sample_shape()) +
                             " do not match network input " + shape_to_string(ann.topology.input_shape));
    }
    const std::size_t depth = ann.topology.layers.size();
    std::vector<std::vector<double>> observed(depth);
    constexpr std::size_t chunk = 128;
    std::vector<std::size_t> idx;
    for (std::size_t begin = 0; begin < calib.size(); begin += chunk) {
        idx.clear();
        for (std::size_t i = begin; i < std::min(begin + chunk, calib.size()); ++i) {
            idx.push_back(i);
        }
        const ForwardResult fwd = forward_batch(ann, calib.gather(idx));
        for (std::size_t l = 0; l < depth; ++l) {
            if (ann.topology.is_clipped(l)) {
                const auto& z = fwd.pre_activations[l].values();
                observed[l].insert(observed[l].end(), z.begin(), z.end());
            }
        }
    }
    std::vector<double> thresholds(depth, 0.0);
    for (std::size_t l = 0; l < depth; ++l) {
        if (ann.topology.is_clipped(l)) {
            thresholds[l] = nearest_rank_percentile(std::move(observed[l]), p);
        }
    }
    return thresholds;
}

Tensor initial_potentials(const InitStrategy& init, const Shape& shape, double vth, Rng& rng)
{
    Tensor v(shape);
    switch (init.kind) {
    case InitStrategy::Kind::zero:
        break;
    case InitStrategy::Kind::optimal_half:
        v.fill(vth / 2.0);
        break;
    case InitStrategy::Kind::constant_fraction:
        v.fill(init.fraction * vth);
        break;
    case InitStrategy::Kind::uniform_random:
        for (double& x : v.values()) {
            x = rng.uniform() * vth;
        }
        break;
    case InitStrategy::Kind::gaussian_random:
        for (double& x : v.values()) {
            // Rejection keeps the exact truncated normal; the clamp only guards
            // against a pathological mean far outside [0, 1].
            double draw = 0.0;
            bool accepted = false;
            for (int attempt = 0; attempt < 1000 && !accepted; ++attempt) {
                draw = rng.normal(init.mu, init.sigma);
                accepted = draw >= 0.0 && draw <= 1.0;
            }
            x = std::clamp(draw, 0.0, 1.0) * vth;
        }
        break;
    }
    return v;
}

}  // namespace

std::pair<SnnNetwork, ConversionReport> convert(const AnnNetwork& ann, const ThresholdMode& mode,
                                                const InitStrategy& init, const Dataset* calib)
{
    ann.topology.validate();
    const std::size_t depth = ann.topology.layers.size();
    for (std::size_t l = 0; l < depth && l < ann.params.size(); ++l) {
        if (ann.topology.is_clipped(l) && !(ann.params[l].theta > 0.0)) {
            throw ConversionError("layer " + std::to_string(l) + " has clip bound " +
                                  std::to_string(ann.params[l].theta) + "; thresholds must be positive");
        }
    }
    ann.validate();
    init.validate();

    std::vector<double> thresholds(depth, 0.0);
    if (mode.kind == ThresholdMode::Kind::data_percentile) {
        if (!calib) {
            throw ConfigError("percentile thresholds need a calibration dataset");
        }
        thresholds = percentile_thresholds(ann, *calib, mode.percentile);
    } else {
        if (calib) {
            throw ConfigError("a calibration dataset is only used with percentile thresholds");
        }
        for (std::size_t l = 0; l < depth; ++l) {
            thresholds[l] = ann.topology.is_clipped(l) ? ann.params[l].theta : 0.0;
        }
    }

    const auto shapes = ann.topology.output_shapes();
    SnnNetwork snn;
    snn.topology = ann.topology;
    snn.params.resize(depth);
    snn.threshold.assign(depth, 0.0);
    snn.v_init.resize(depth);

    ConversionReport report;
    report.threshold_mode = mode.label();
    report.init_strategy = init.label();

    const Rng base(init.seed);
    for (std::size_t l = 0; l < depth; ++l) {
        if (!ann.topology.layers[l].is_parametric()) {
            continue;
        }
        snn.params[l].weight = ann.params[l].weight;
        snn.params[l].bias = ann.params[l].bias;
        if (!ann.topology.is_clipped(l)) {
            continue;
        }
        const double vth = thresholds[l];
        if (!(vth > 0.0 && std::isfinite(vth))) {
            throw ConversionError("layer " + std::to_string(l) + " would get threshold " + std::to_string(vth) +
                                  "; thresholds must be positive");
        }
        Rng rng = base.split(l);
        snn.threshold[l] = vth;
        snn.v_init[l] = initial_potentials(init, shapes[l], vth, rng);

        LayerConversion entry;
        entry.layer = l;
        entry.threshold = vth;
        const auto& v = snn.v_init[l].values();
        double sum = 0.0;
        entry.init_min = std::numeric_limits<double>::infinity();
        entry.init_max = -std::numeric_limits<double>::infinity();
        for (double x : v) {
            sum += x;
            entry.init_min = std::min(entry.init_min, x);
            entry.init_max = std::max(entry.init_max, x);
        }
        entry.init_mean = sum / static_cast<double>(v.size());
        report.layers.push_back(entry);
    }
    snn.validate();
    return {std::move(snn), std::move(report)};
}

SnnNetwork threshold_normalized(const SnnNetwork& snn)
{
    snn.validate();
    SnnNetwork out = snn;
    double in_scale = 1.0;
    for (std::size_t l = 0; l < snn.topology.layers.size(); ++l) {
        if (!snn.topology.layers[l].is_parametric()) {
            continue;
        }
        const double out_scale = snn.is_spiking(l) ? snn.threshold[l] : 1.0;
        for (double& w : out.params[l].weight.values()) {
            w = w * in_scale / out_scale;
        }
        for (double& b : out.params[l].bias.values()) {
            b = b / out_scale;
        }
        if (snn.is_spiking(l)) {
            for (double& v : out.v_init[l].values()) {
                v = v / out_scale;
            }
            out.threshold[l] = 1.0;
        }
        in_scale = out_scale;
    }
    return out;
}

NormalizationCheck weight_normalize_equivalence_check(const AnnNetwork& ann, const std::vector<Tensor>& probes,
                                                      int steps, const InitStrategy& init)
{
    const SnnNetwork balanced = convert(ann, ThresholdMode::trained_clip(), init).first;
    const SnnNetwork normalized = threshold_normalized(balanced);

    NormalizationCheck check;
    SimOptions options;
    options.record_spikes = true;
    for (const Tensor& probe : probes) {
        const SimTrace a = simulate(balanced, probe, steps, options);
        const SimTrace b = simulate(normalized, probe, steps, options);
        for (std::size_t l = 0; l < a.spikes.size(); ++l) {
            for (std::size_t t = 0; t < a.spikes[l].size(); ++t) {
                const Tensor& sa = a.spikes[l][t];
                const Tensor& sb = b.spikes[l][t];
                for (std::size_t i = 0; i < sa.size(); ++i) {
                    const double d = std::abs(sa[i] - sb[i]);
                    check.max_discrepancy = std::max(check.max_discrepancy, d);
                    check.mismatched_spikes += d != 0.0 ? 1 : 0;
                    ++check.compared_spikes;
                }
            }
        }
        for (std::size_t i = 0; i < a.output_accumulator.size(); ++i) {
            check.max_readout_difference = std::max(
                check.max_readout_difference, std::abs(a.output_accumulator[i] - b.output_accumulator[i]));
        }
    }
    return check;
}

}  // namespace annsnn
