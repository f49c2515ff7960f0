#include <doctest.h>

#include <cmath>
#include <sstream>

#include "annsnn/converter.hpp"
#include "annsnn/errors.hpp"
#include "annsnn/theory.hpp"

using namespace annsnn;

TEST_CASE("floor activation")
{
    CHECK(floor_activation(0.6, {1.0, 4, 0.5}) == 0.5);
    CHECK(floor_activation(-0.3, {1.0, 4, 0.5}) == 0.0);
    CHECK(floor_activation(-0.3, {2.0, 7, 2.0}) == 0.0);
    CHECK(floor_activation(1.0, {1.0, 8, 0.5}) == 1.0);
    CHECK(floor_activation(2.0, {2.0, 3, 1.0}) == 2.0);
    const Tensor out = floor_activation(Tensor::vector({0.6, -0.3}), {1.0, 4, 0.5});
    CHECK(out == Tensor::vector({0.5, 0.0}));
    CHECK_THROWS_AS(floor_activation(Tensor::vector({0.1}), {1.0, 0, 0.5}), ConfigError);
    CHECK_THROWS_AS(floor_activation(Tensor::vector({0.1}), {1.0, 4, 1.5}), ConfigError);
}

TEST_CASE("closed-form error spot values")
{
    CHECK(std::abs(expected_squared_error(ErrorModel::uniform(1.0, 4, 0.5)) - 1.0 / 192.0) <= 1e-12);
    CHECK(std::abs(expected_squared_error(ErrorModel::uniform(1.0, 4, 0.0)) - 1.0 / 48.0) <= 1e-12);
    CHECK(expected_signed_error(ErrorModel::uniform(1.0, 4, 0.5)) == 0.0);
    CHECK(expected_signed_error(ErrorModel::uniform(2.0, 9, 1.0)) == 0.0);
    CHECK(std::abs(expected_signed_error(ErrorModel::uniform(1.0, 4, 0.0)) - 0.125) <= 1e-12);
    CHECK(std::abs(expected_signed_error(ErrorModel::uniform(1.0, 4, 1.0)) + 0.125) <= 1e-12);
    // V^2 / (12 T^2) at the optimum for any threshold
    CHECK(std::abs(expected_squared_error(ErrorModel::uniform(2.0, 5, 1.0)) - 4.0 / 300.0) <= 1e-12);
}

TEST_CASE("squared error follows the inverse square law")
{
    for (double v0 : {0.0, 0.2, 0.5, 0.9}) {
        const double ref = expected_squared_error(ErrorModel::uniform(1.0, 1, v0));
        for (int t = 2; t <= 64; t *= 2) {
            CHECK(std::abs(expected_squared_error(ErrorModel::uniform(1.0, t, v0)) * t * t - ref) <= 1e-12);
        }
        const double a = expected_squared_error(ErrorModel::uniform(1.0, 3, v0));
        const double b = expected_squared_error(ErrorModel::uniform(1.0, 6, v0));
        CHECK(std::abs(b - a / 4.0) <= 1e-15);
    }
}

TEST_CASE("error model construction")
{
    const ErrorModel m = ErrorModel::uniform(1.0, 4, 0.3);
    const std::vector<double> bounds = m.boundaries();
    REQUIRE(bounds.size() == 6);
    CHECK(bounds.front() == 0.0);
    CHECK(bounds.back() == 1.0);
    CHECK(bounds[1] == doctest::Approx((1.0 - 0.3) / 4.0));
    CHECK(bounds[4] == doctest::Approx((4.0 - 0.3) / 4.0));

    const ErrorModel p = ErrorModel::piecewise(1.0, 4, 0.3, {2, 1, 5, 3, 2});
    double total = 0.0;
    for (std::size_t t = 0; t <= 4; ++t) {
        total += p.mass(t);
    }
    CHECK(std::abs(total - 1.0) <= 1e-12);
    CHECK(p.densities().front() == p.densities().back());
    CHECK_THROWS_AS(ErrorModel::piecewise(1.0, 4, 0.3, {1, 1, 1, 1, 2}), ConfigError);
    CHECK_THROWS_AS(ErrorModel::piecewise(1.0, 4, 0.3, {1, 1, 1}), ConfigError);
    CHECK_THROWS_AS(ErrorModel::piecewise(1.0, 4, 0.3, {1, -1, 1, 1, 1}), ConfigError);
}

TEST_CASE("Monte Carlo agrees with the closed forms")
{
    Rng rng(2024);
    const std::size_t n = 1000000;
    const MonteCarloResult mc = monte_carlo_error({1.0, 4, 0.5}, ZSampler::uniform(0.0, 1.0), n, rng);
    CHECK(std::abs(mc.mean_squared - 1.0 / 192.0) <= 3.0 * mc.stderr_squared());

    const std::vector<double> weights{3, 1, 2, 0.5, 3};
    for (double v0 : {0.1, 0.5, 0.8}) {
        const ErrorModel model = ErrorModel::piecewise(1.0, 4, v0, weights);
        const MonteCarloResult pw = monte_carlo_error({1.0, 4, v0}, ZSampler::piecewise(model), 200000, rng);
        CHECK(std::abs(pw.mean_squared - expected_squared_error(model)) <= 4.0 * pw.stderr_squared());
        CHECK(std::abs(pw.mean_signed - expected_signed_error(model)) <= 4.0 * pw.stderr_signed());
    }

    const MonteCarloResult point = monte_carlo_error({1.0, 4, 0.5}, ZSampler::point(0.5), 10, rng);
    CHECK(point.mean_signed == 0.0);
    CHECK(point.mean_squared == 0.0);

    Rng a(5), b(5);
    const MonteCarloResult one_a = monte_carlo_error({1.0, 4, 0.2}, ZSampler::uniform(0.0, 1.0), 1, a);
    const MonteCarloResult one_b = monte_carlo_error({1.0, 4, 0.2}, ZSampler::uniform(0.0, 1.0), 1, b);
    CHECK(one_a.mean_signed == one_b.mean_signed);
    CHECK(one_a.mean_squared == one_b.mean_squared);
}

TEST_CASE("theorem sweep")
{
    const std::vector<double> grid = uniform_grid(1.0, 11);
    CHECK(grid[5] == 0.5);
    const Theorem1Sweep sweep = theorem1_sweep(1.0, 8, {}, grid);
    CHECK(sweep.argmin_v0 == 0.5);
    CHECK(std::abs(sweep.rows[5].expected_signed) <= 1e-12);
    REQUIRE(sweep.zero_crossing.has_value());
    CHECK(std::abs(*sweep.zero_crossing - 0.5) <= 1e-12);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(std::abs(sweep.rows[i].expected_squared - sweep.rows[grid.size() - 1 - i].expected_squared) <= 1e-12);
    }

    std::vector<double> weights{4, 1, 2, 7, 0.5, 3, 2, 1, 4};
    const Theorem1Sweep skew = theorem1_sweep(1.0, 8, weights, uniform_grid(1.0, 101));
    CHECK(skew.argmin_v0 == 0.5);

    std::ostringstream out;
    sweep.write_csv(out);
    CHECK(out.str().rfind("v0,expected_squared,expected_signed\n", 0) == 0);
}

TEST_CASE("op counts")
{
    const Topology linear{{10}, {LayerSpec::linear(10, 5, false)}};
    CHECK(count_ann_flops(linear) == 2 * 10 * 5 + 5);

    // conv 1->2 3x3 pad 1 on 4x4: 32 outputs, 9 MACs each; pool 2: 8 outputs x 3 adds; linear 8->3
    const Topology cnn{{1, 4, 4},
                       {LayerSpec::conv(1, 2, 3, 1, 1, true), LayerSpec::avgpool(2), LayerSpec::flat(),
                        LayerSpec::linear(8, 3, false)}};
    CHECK(count_ann_flops(cnn) == (2 * 9 * 32 + 32) + 8 * 3 + (2 * 8 * 3 + 3));

    // each conv neuron feeds its pooled cell, which fans out to the 3 readout units
    const Tensor f = fanout(cnn, 0);
    for (double v : f.values()) {
        CHECK(v == 3.0);
    }
    const Tensor f_mlp = fanout(desk_mlp({784}, 10), 1);
    CHECK(f_mlp.size() == 256);
    CHECK(f_mlp[0] == 128.0);

    // conv followed by conv: border neurons reach fewer kernel taps
    const Topology two{{1, 3, 3}, {LayerSpec::conv(1, 1, 3, 1, 1, true), LayerSpec::conv(1, 2, 3, 1, 1, false)}};
    const Tensor g = fanout(two, 0);
    CHECK(g.at(0, 1, 1) == 2 * 9.0);
    CHECK(g.at(0, 0, 0) == 2 * 4.0);
    CHECK(g.at(0, 0, 1) == 2 * 6.0);

    const AnnNetwork ann = AnnNetwork::initialize(desk_mlp({16}, 3), 1);
    const SnnNetwork snn = convert(ann, ThresholdMode::trained_clip(), InitStrategy::zero()).first;
    const SimTrace silent = simulate(snn, Tensor({16}, 0.0), 16);
    const OpCountReport r = count_ops(ann, silent);
    CHECK(r.snn_sops == 0.0);
    CHECK(r.ratio == 0.0);
    CHECK(r.ann_flops == (2 * 16 * 256 + 256) + (2 * 256 * 128 + 128) + (2 * 128 * 3 + 3));

    const SimTrace busy = simulate(snn, Tensor({16}, 1.0), 16);
    double expected = 0.0;
    for (std::size_t l = 0; l < 2; ++l) {
        const Tensor fl = fanout(ann.topology, l + 1);
        for (std::size_t i = 0; i < fl.size(); ++i) {
            expected += busy.spike_count[l + 1][i] * fl[i];
        }
    }
    const OpCountReport rb = count_ops(ann, busy);
    CHECK(rb.snn_sops == expected);
    CHECK(rb.ann_energy == static_cast<double>(rb.ann_flops) * 12.5e-12);
    CHECK(rb.snn_energy == rb.snn_sops * 77e-15);

    CHECK_THROWS_AS(count_ops(AnnNetwork::initialize(desk_mlp({16}, 4), 1), busy), ConfigError);

    std::ostringstream out;
    rb.write_csv(out);
    const std::string text = out.str();
    CHECK(text.rfind("metric,value\n", 0) == 0);
    CHECK(text.find("joules_per_flop,1.25e-11") != std::string::npos);
    CHECK(text.find("joules_per_sop,7.7e-14") != std::string::npos);
}

TEST_CASE("single-neuron oracle sample")
{
    Rng rng(77);
    const OracleReport report = verify_floor_oracle(2000, rng);
    CHECK(report.tuples == 2000);
    CHECK(report.mismatches == 0);
}
