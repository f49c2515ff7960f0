// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "annsnn/converter.hpp"
#include "annsnn/dataset_io.hpp"
#include "annsnn/experiment.hpp"
#include "annsnn/rng.hpp"
#include "annsnn/snn.hpp"
#include "annsnn/theory.hpp"

#ifndef ANNSNN_CLI_PATH
#error "ANNSNN_CLI_PATH must name the command-line tool"
#endif

using namespace annsnn;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void verdict(int id, const std::string& name, bool pass, const std::string& detail)
{
    std::printf("[%s] %2d %s: %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
    std::fflush(stdout);
    failures += pass ? 0 : 1;
}

std::string fmt(const char* format, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* format, ...)
{
    char buf[1024];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof buf, format, args);
    va_end(args);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Closed forms written out independently of the library, uniform density 1/V.
double uniform_squared(double v, int t, double v0)
{
    return (t / v) * (std::pow(v - v0, 3) + std::pow(v0, 3)) / (3.0 * t * t * t);
}

double uniform_signed(double v, int t, double v0)
{
    return (t / v) * ((v - v0) * (v - v0) - v0 * v0) / (2.0 * t * t);
}

void criterion_floor_oracle()
{
    const auto start = std::chrono::steady_clock::now();
    Rng rng(20240601);
    const double thresholds[] = {0.5, 1.0, 2.0};
    const std::size_t tuples = 10000;
    std::size_t mismatches = 0;
    for (std::size_t i = 0; i < tuples; ++i) {
        const double v_th = thresholds[rng.below(3)];
        const int steps = 1 + static_cast<int>(rng.below(64));
        const double z = rng.uniform(-0.5, v_th);
        const double v0 = rng.uniform(0.0, v_th);
        const SimTrace trace = simulate(single_neuron(v_th, v0), Tensor({1}, z), steps);
        const double expected = std::max(std::floor((steps * z + v0) / v_th), 0.0) / steps;
        mismatches += trace.rate[0][0] != expected;
    }
    const double elapsed = seconds_since(start);
    verdict(1, "floor-form oracle equivalence", mismatches == 0 && elapsed < 10.0,
            fmt("%zu tuples, %zu mismatches, %.2f s (limit 10 s)", tuples, mismatches, elapsed));
}

void criterion_theorem_analytic()
{
    bool ok = true;
    std::string detail;
    const std::vector<double> grid = uniform_grid(1.0, 101);
    for (int t : {4, 8, 16}) {
        const Theorem1Sweep sweep = theorem1_sweep(1.0, t, {}, grid);
        const double signed_half = sweep.rows[50].expected_signed;
        ok = ok && grid[50] == 0.5 && sweep.argmin_v0 == 0.5 && std::abs(signed_half) <= 1e-12;
        detail += fmt("T=%d argmin %.2f signed(0.5) %.1e; ", t, sweep.argmin_v0, signed_half);
    }
    const double sq_half = expected_squared_error(ErrorModel::uniform(1.0, 4, 0.5));
    const double sq_zero = expected_squared_error(ErrorModel::uniform(1.0, 4, 0.0));
    const bool spots = std::abs(sq_half - 1.0 / 192.0) <= 1e-12 && std::abs(sq_zero - 1.0 / 48.0) <= 1e-12 &&
                       std::abs(sq_half - uniform_squared(1.0, 4, 0.5)) <= 1e-12 &&
                       std::abs(sq_zero - uniform_squared(1.0, 4, 0.0)) <= 1e-12;
    detail += fmt("E[sq](4,0.5)=%.10f E[sq](4,0)=%.10f", sq_half, sq_zero);
    verdict(2, "theorem, analytic", ok && spots, detail);
}

void criterion_theorem_monte_carlo()
{
    const auto start = std::chrono::steady_clock::now();
    Rng rng(7);
    bool ok = true;
    double worst = 0.0;
    const std::size_t n = 1000000;
    for (int t : {4, 8, 16}) {
        for (double v0 : {0.0, 0.25, 0.5, 0.75, 1.0}) {
            const MonteCarloResult mc = monte_carlo_error({1.0, t, v0}, ZSampler::uniform(0.0, 1.0), n, rng);
            const double zs = std::abs(mc.mean_squared - uniform_squared(1.0, t, v0)) / mc.stderr_squared();
            const double zg = std::abs(mc.mean_signed - uniform_signed(1.0, t, v0)) / mc.stderr_signed();
            worst = std::max({worst, zs, zg});
            ok = ok && zs <= 4.0 && zg <= 4.0;
        }
    }
    const double elapsed = seconds_since(start);
    verdict(3, "theorem, Monte Carlo", ok && elapsed < 30.0,
            fmt("n=1e6 per (T, v0), T in {4,8,16}, v0 in {0,.25,.5,.75,1}; worst deviation %.2f standard errors "
                "(limit 4), %.2f s (limit 30 s)",
                worst, elapsed));
}

void criterion_inverse_square()
{
    double spread = 0.0;
    for (double v0 : {0.0, 0.1, 0.25, 0.5, 0.8, 1.0}) {
        const double ref = expected_squared_error(ErrorModel::uniform(1.0, 1, v0));
        for (int t = 2; t <= 64; t *= 2) {
            spread = std::max(spread, std::abs(expected_squared_error(ErrorModel::uniform(1.0, t, v0)) * t * t - ref));
        }
    }
    verdict(4, "1/T^2 law", spread <= 1e-12,
            fmt("max |E[sq](T) T^2 - E[sq](1)| = %.2e over T in 1..64, six v0 values (limit 1e-12)", spread));
}

void criterion_gradient_check()
{
    Topology topo{{10}, {LayerSpec::linear(10, 8, true), LayerSpec::linear(8, 6, true), LayerSpec::linear(6, 4, false)}};
    AnnNetwork net = AnnNetwork::initialize(topo, 12345);
    Rng rng(99);
    for (std::size_t l = 0; l < 2; ++l) {
        net.params[l].theta = 0.4;
        for (double& b : net.params[l].bias.values()) {
            b = rng.uniform(-0.1, 0.1);
        }
    }
    const std::size_t batch = 6;
    Tensor inputs({batch, 10});
    for (double& v : inputs.values()) {
        v = rng.uniform(0.0, 2.0);
    }
    std::vector<int> labels(batch);
    for (int& y : labels) {
        y = static_cast<int>(rng.below(4));
    }
    const LossAndGradients lg = loss_and_gradients(net, inputs, labels);
    const double h = 1e-5;
    std::size_t compared = 0, skipped = 0;
    double worst = 0.0;
    auto probe = [&](double& slot, double analytic) {
        const double keep = slot;
        slot = keep + h;
        const double up = cross_entropy_loss(net, inputs, labels);
        slot = keep - h;
        const double down = cross_entropy_loss(net, inputs, labels);
        slot = keep;
        if (std::abs(analytic) <= 1e-6) {
            ++skipped;
            return;
        }
        worst = std::max(worst, std::abs(analytic - (up - down) / (2 * h)) / std::abs(analytic));
        ++compared;
    };
    std::size_t theta_compared = 0;
    for (std::size_t l = 0; l < 3; ++l) {
        for (int k = 0; k < 20; ++k) {
            const std::size_t wi = rng.below(net.params[l].weight.size());
            probe(net.params[l].weight[wi], lg.grads.weight[l][wi]);
            const std::size_t bi = rng.below(net.params[l].bias.size());
            probe(net.params[l].bias[bi], lg.grads.bias[l][bi]);
        }
        if (topo.is_clipped(l)) {
            const std::size_t before = compared;
            probe(net.params[l].theta, lg.grads.theta[l]);
            theta_compared += compared - before;
        }
    }
    verdict(5, "gradient check", worst <= 1e-4 && theta_compared == 2,
            fmt("%zu probes compared (%zu with |grad| <= 1e-6 skipped), both dL/dtheta included: %s; worst relative "
                "error %.2e (limit 1e-4)",
                compared, skipped, theta_compared == 2 ? "yes" : "no", worst));
}

void criterion_threshold_scaling()
{
    double worst = 0.0;
    std::size_t compared = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Topology topo{{12}, {LayerSpec::linear(12, 10, true), LayerSpec::linear(10, 8, true),
                             LayerSpec::linear(8, 5, false)}};
        AnnNetwork ann = AnnNetwork::initialize(topo, seed);
        Rng rng(seed + 1000);
        for (std::size_t l = 0; l < 2; ++l) {
            ann.params[l].theta = rng.uniform(0.3, 3.0);
            for (double& b : ann.params[l].bias.values()) {
                b = rng.uniform(-0.2, 0.2);
            }
        }
        std::vector<Tensor> probes;
        for (int i = 0; i < 8; ++i) {
            Tensor x({12});
            for (double& v : x.values()) {
                v = rng.uniform();
            }
            probes.push_back(x);
        }
        const NormalizationCheck check = weight_normalize_equivalence_check(ann, probes, 32);
        worst = std::max(worst, check.max_discrepancy);
        compared += check.compared_spikes;
    }
    verdict(6, "threshold-scaling invariance", worst == 0.0 && compared > 0,
            fmt("5 networks x 8 probes x T=32: %zu spike slots compared, max discrepancy %g", compared, worst));
}

struct Desk
{
    Dataset train;
    Dataset test;
    AnnNetwork mlp;
    SweepResult sweep;
};

Desk desk_data()
{
    BlobConfig cfg;
    cfg.seed = 1;
    cfg.samples = 3000;
    Desk d;
    d.train = make_blobs(cfg, 0);
    cfg.samples = 2000;
    d.test = make_blobs(cfg, 1);
    return d;
}

TrainConfig desk_training(int epochs)
{
    TrainConfig tc;
    tc.epochs = epochs;
    tc.seed = 1;
    return tc;
}

void criterion_conversion(Desk& desk)
{
    const auto start = std::chrono::steady_clock::now();
    desk.mlp = train_architecture(Architecture::mlp, desk.train, desk_training(10), 1);
    SweepOptions opt;
    opt.latency_samples = 100;
    const std::vector<int> steps{1, 2, 4, 8, 16, 32, 64};
    desk.sweep =
        sweep_network(desk.mlp, desk.test, ThresholdMode::trained_clip(),
                      {InitStrategy::zero(), InitStrategy::optimal_half(), InitStrategy::uniform(1),
                       InitStrategy::gaussian(0.5, 0.2, 1)},
                      steps, opt);
    const SweepResult& r = desk.sweep;
    const double ann = r.ann_accuracy;
    const double h32 = r.accuracy("half", 32), h16 = r.accuracy("half", 16), h8 = r.accuracy("half", 8);
    const double z8 = r.accuracy("zero", 8);
    const double elapsed = seconds_since(start);
    const bool pass = ann >= 0.90 && std::abs(h32 - ann) <= 0.01 && std::abs(h16 - ann) <= 0.02 && z8 < h8 &&
                      elapsed < 600.0;
    verdict(7, "desk-scale conversion quality", pass,
            fmt("MLP test acc %.4f (>= 0.90); half T=32 %.4f (|d| %.4f <= 0.01), T=16 %.4f (|d| %.4f <= 0.02); "
                "T=8 zero %.4f < half %.4f; %.1f s",
                ann, h32, std::abs(h32 - ann), h16, std::abs(h16 - ann), z8, h8, elapsed));
}

// Constant-fraction surface on the same network and test set.
void criterion_constant_sweep(const Desk& desk)
{
    const SweepResult& r = desk.sweep;
    const std::vector<int> c_steps{8, 16, 32, 64};
    SweepOptions copt;
    copt.latency_samples = 0;
    copt.energy_steps = 0;
    const ConstantSweepResult cs = constant_sweep_network(desk.mlp, desk.test, ThresholdMode::trained_clip(),
                                                          default_fraction_grid(), c_steps, copt);
    bool in_band = true;
    std::string best;
    for (const auto& [t, c] : cs.best_fraction) {
        in_band = in_band && c >= 0.3 - 1e-12 && c <= 0.7 + 1e-12;
        best += fmt("T=%d c*=%.1f ", t, c);
    }
    bool identical = true;
    for (int t : c_steps) {
        identical = identical && cs.sweep.accuracy("const:0.5", t) == r.accuracy("half", t);
    }
    std::string spread;
    for (int t : c_steps) {
        double lo = 1.0, hi = 0.0;
        for (double c : cs.fractions) {
            char label[32];
            std::snprintf(label, sizeof label, "const:%g", c);
            const double a = cs.sweep.accuracy(label, t);
            lo = std::min(lo, a);
            hi = std::max(hi, a);
        }
        spread += fmt("T=%d range %.4f-%.4f ", t, lo, hi);
    }
    verdict(9, "constant-fraction sweep", in_band && identical,
            fmt("%s(band [0.3,0.7]); c=0.5 column identical to half: %s; %s", best.c_str(),
                identical ? "yes" : "no", spread.c_str()));
}

// Not a criterion: where the readout error against the ANN logits bottoms out.
void info_logit_error(const Desk& desk)
{
    const Dataset probe = desk.test.head(200);
    std::vector<Tensor> logits;
    for (std::size_t i = 0; i < probe.size(); ++i) {
        logits.push_back(forward(desk.mlp, probe.sample(i)).logits);
    }
    std::string detail;
    for (int t : {8, 16, 32, 64}) {
        double best_c = 0.0, best_err = INFINITY;
        for (double c : default_fraction_grid()) {
            const SnnNetwork snn = convert(desk.mlp, ThresholdMode::trained_clip(), InitStrategy::constant(c)).first;
            double err = 0.0;
            for (std::size_t i = 0; i < probe.size(); ++i) {
                const Tensor acc = simulate(snn, probe.sample(i), t).output_accumulator;
                for (std::size_t k = 0; k < acc.size(); ++k) {
                    const double d = acc[k] / t - logits[i][k];
                    err += d * d;
                }
            }
            if (err < best_err) {
                best_err = err;
                best_c = c;
            }
        }
        detail += fmt("T=%d c*=%.1f ", t, best_c);
    }
    std::printf("[INFO]    logit mean-squared error against the ANN is smallest at %s(200 samples)\n", detail.c_str());
}

void criterion_latency(const Desk& desk)
{
    const Dataset train = adapt_for(Architecture::cnn, desk.train);
    const Dataset test = adapt_for(Architecture::cnn, desk.test).head(100);
    const AnnNetwork cnn = train_architecture(Architecture::cnn, train, desk_training(3), 1);
    SweepOptions opt;
    opt.latency_samples = 100;
    opt.energy_steps = 0;
    const SweepResult r = sweep_network(cnn, test, ThresholdMode::trained_clip(),
                                        {InitStrategy::zero(), InitStrategy::optimal_half()}, {8, 16, 32, 64}, opt);
    bool ok = !r.latency.empty();
    std::string detail = fmt("CNN acc %.3f; ", r.ann_accuracy);
    for (std::size_t l = 0; l < cnn.topology.layers.size(); ++l) {
        if (!cnn.topology.is_clipped(l)) {
            continue;
        }
        const double z = r.mean_first_spike("zero", l), h = r.mean_first_spike("half", l);
        ok = ok && z >= h;
        detail += fmt("layer %zu zero %.3f >= half %.3f; ", l, z, h);
    }
    verdict(8, "first-spike latency", ok, detail + "100 samples, silent neurons counted as T_max+1 = 65");
}

void criterion_energy()
{
    const AnnNetwork ann = AnnNetwork::initialize(desk_mlp({784}, 10), 1);
    const std::uint64_t hand = (2ULL * 784 * 256 + 256) + (2ULL * 256 * 128 + 128) + (2ULL * 128 * 10 + 10);
    const SnnNetwork snn = convert(ann, ThresholdMode::trained_clip(), InitStrategy::zero()).first;
    const OpCountReport silent = count_ops(ann, simulate(snn, Tensor({784}, 0.0), 32));
    std::ostringstream csv;
    silent.write_csv(csv);
    const std::string text = csv.str();
    const bool constants = joules_per_flop == 12.5e-12 && joules_per_sop == 77e-15 &&
                           text.find("joules_per_flop,1.25e-11\n") != std::string::npos &&
                           text.find("joules_per_sop,7.7e-14\n") != std::string::npos;
    verdict(10, "energy report", silent.ann_flops == hand && silent.snn_sops == 0.0 && constants,
            fmt("FLOPs %llu vs hand count %llu; zero-spike SOPs %g; constants 12.5 pJ/FLOP and 77 fJ/SOP embedded: %s",
                static_cast<unsigned long long>(silent.ann_flops), static_cast<unsigned long long>(hand),
                silent.snn_sops, constants ? "yes" : "no"));
}

std::string slurp(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void criterion_determinism()
{
    const fs::path dir = fs::temp_directory_path() / "annsnn_acceptance_determinism";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string cli = ANNSNN_CLI_PATH;
    auto run = [&](const std::string& args) {
        const std::string cmd = "\"" + cli + "\" " + args + " > \"" + (dir / "log.txt").string() + "\" 2>&1";
        return std::system(cmd.c_str());
    };
    bool ok = run("gen-data --out \"" + dir.string() + "\" --train-samples 600 --test-samples 200 --seed 3") == 0;
    const std::string common = "sweep --data \"" + (dir / "train.csv").string() + "\" --test-data \"" +
                               (dir / "test.csv").string() +
                               "\" --epochs 2 --T-list 1,4,16 --init zero --init half --init uniform --init "
                               "gauss:0.5,0.2 --seed 3 --latency-samples 20 --energy-T 8";
    ok = ok && run(common + " --model \"" + (dir / "a.model").string() + "\" --out \"" + (dir / "a").string() + "\"") == 0;
    ok = ok && run(common + " --model \"" + (dir / "b.model").string() + "\" --out \"" + (dir / "b").string() + "\"") == 0;
    std::size_t same = 0, files = 0;
    for (const char* name : {"sweep.csv", "latency.csv", "energy.csv", "summary.csv", "accuracy.svg"}) {
        ++files;
        const std::string a = slurp(dir / "a" / name);
        same += !a.empty() && a == slurp(dir / "b" / name);
    }
    const bool models = ok && slurp(dir / "a.model") == slurp(dir / "b.model");
    verdict(11, "determinism", ok && same == files && models,
            fmt("two CLI sweep runs, same config and seed: %zu/%zu report files and the trained model "
                "byte-identical: %s",
                same, files, models ? "yes" : "no"));
    fs::remove_all(dir);
}

}  // namespace

int main()
{
    criterion_floor_oracle();
    criterion_theorem_analytic();
    criterion_theorem_monte_carlo();
    criterion_inverse_square();
    criterion_gradient_check();
    criterion_threshold_scaling();
    Desk desk = desk_data();
    criterion_conversion(desk);
    criterion_latency(desk);
    criterion_constant_sweep(desk);
    info_logit_error(desk);
    criterion_energy();
    criterion_determinism();
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
