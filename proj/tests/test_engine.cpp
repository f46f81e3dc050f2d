#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "coral/engine.hpp"
#include "coral/rng.hpp"

using namespace coral;

namespace {

std::shared_ptr<QuadraticProblem> small_quadratic(int n_agents, int dim, std::uint64_t seed) {
    return random_quadratic_problem(n_agents, dim, seed);
}

RunParams reference_params() {
    RunParams p;
    p.gamma = 0.1;
    p.delta = 0.5;
    p.rho = 0.9;
    p.alpha = 0.9;
    return p;
}

}  // namespace

TEST_CASE("local_averaging_step: zero duals reduce to plain scaling") {
    Eigen::VectorXd x(2), g(2), y(2), s(2);
    x << 1.4, -0.7;
    g << 0.2, 2.0;
    const Eigen::VectorXd z1 = Eigen::VectorXd::Zero(4), z2 = Eigen::VectorXd::Zero(4);
    local_averaging_step(x, g, {&z1, &z2}, 0.9, y, s);
    CHECK((y - x / 2.8).cwiseAbs().maxCoeff() < 1e-15);  // 1 + 0.9 * 2 = 2.8
    CHECK((s - g / 2.8).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("local_averaging_step: duals cancelling the local part give zero") {
    Eigen::VectorXd x(2), g(2), y(2), s(2);
    x << 3.0, 1.0;
    g << -1.0, 0.5;
    Eigen::VectorXd zc(4);
    zc << -x / 2, -g / 2;  // each of the two edges carries -[x; g]/d_i
    local_averaging_step(x, g, {&zc, &zc}, 1.7, y, s);
    CHECK(y.cwiseAbs().maxCoeff() < 1e-15);
    CHECK(s.cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("local_averaging_step: random inputs vs re-evaluated formula") {
    std::mt19937_64 rng(404);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 3;
        Eigen::VectorXd x(n), g(n), y(n), s(n);
        for (int l = 0; l < n; ++l) {
            x[l] = gauss(rng);
            g[l] = gauss(rng);
        }
        std::vector<Eigen::VectorXd> z(3, Eigen::VectorXd(2 * n));
        std::vector<const Eigen::VectorXd*> zp;
        for (auto& v : z) {
            for (int l = 0; l < 2 * n; ++l) v[l] = gauss(rng);
            zp.push_back(&v);
        }
        const double rho = 0.3 + std::abs(gauss(rng));
        local_averaging_step(x, g, zp, rho, y, s);
        // Second path: stack and scale in one expression.
        Eigen::VectorXd stacked(2 * n);
        stacked << x, g;
        for (const auto& v : z) stacked += v;
        stacked /= 1.0 + rho * 3;
        CHECK((y - stacked.head(n)).cwiseAbs().maxCoeff() < 1e-15);
        CHECK((s - stacked.tail(n)).cwiseAbs().maxCoeff() < 1e-15);
    }
}

TEST_CASE("solution_update fixed points and hand arithmetic") {
    Eigen::VectorXd x(2), y(2), s(2);
    x << 1, 1;
    SUBCASE("y = x, s = 0 is a fixed point") {
        CHECK(solution_update(x, x, Eigen::VectorXd::Zero(2), 0.3, 0.7) == x);
    }
    SUBCASE("gamma = 1, delta -> 0 moves to y") {
        y << -2, 5;
        CHECK((solution_update(x, y, Eigen::VectorXd::Zero(2), 1.0, 0.5) - y)
                  .cwiseAbs()
                  .maxCoeff() < 1e-15);
    }
    SUBCASE("hand-evaluated step") {
        y << 0, 0;
        s << 1, 0;
        const Eigen::VectorXd next = solution_update(x, y, s, 0.1, 0.5);
        CHECK(next[0] == doctest::Approx(0.85).epsilon(1e-15));
        CHECK(next[1] == doctest::Approx(0.9).epsilon(1e-15));
    }
}

TEST_CASE("nominal_message identities") {
    Eigen::VectorXd y(2), s(2);
    y << 0.4, -1.0;
    s << 2.0, 0.1;
    const double rho = 0.9;
    Eigen::VectorXd ys(4);
    ys << y, s;
    SUBCASE("z equal to 2 rho [y;s] nulls the message") {
        CHECK(nominal_message(2 * rho * ys, y, s, rho).cwiseAbs().maxCoeff() < 1e-15);
    }
    SUBCASE("rho = 0 returns -z") {
        Eigen::VectorXd z(4);
        z << 1, -2, 3, -4;
        CHECK(nominal_message(z, y, s, 0.0) == -z);
    }
    SUBCASE("random inputs vs duplicate formula") {
        std::mt19937_64 rng(7);
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (int trial = 0; trial < 50; ++trial) {
            Eigen::VectorXd z(4);
            for (int l = 0; l < 4; ++l) z[l] = gauss(rng);
            const Eigen::VectorXd got = nominal_message(z, y, s, rho);
            CHECK((got - (2 * rho * ys - z)).cwiseAbs().maxCoeff() < 1e-15);
        }
    }
}

TEST_CASE("compressor bank routes residuals and counts bits") {
    SUBCASE("top_1 picks the dominant residual coordinate") {
        CompressorBank bank(CompressorKind::top_k, 1, CompressScope::message, 3, 5);
        Eigen::VectorXd residual(4);
        residual << 3, -4, 0, 0;
        const Eigen::VectorXd sent = bank.apply(0, residual);
        Eigen::VectorXd expect(4);
        expect << 0, -4, 0, 0;
        CHECK(sent == expect);
        CHECK(bank.bits_accumulated() == 66);  // ceil(log2 4) + 64
    }
    SUBCASE("identity transmits the exact residual as a dense block") {
        CompressorBank bank(CompressorKind::identity, 1, CompressScope::message, 3, 5);
        Eigen::VectorXd residual(4);
        residual << 0.5, -0.25, 1.0, 2.0;
        CHECK(bank.apply(1, residual) == residual);
        CHECK(bank.bits_accumulated() == 4 * 64);
    }
    SUBCASE("zero residual transmits a zero message") {
        CompressorBank bank(CompressorKind::rand_k, 1, CompressScope::message, 3, 5);
        CHECK(bank.apply(2, Eigen::VectorXd::Zero(6)).isZero(0.0));
    }
    SUBCASE("block scope compresses the two halves independently") {
        CompressorBank bank(CompressorKind::top_k, 1, CompressScope::block, 3, 5);
        Eigen::VectorXd residual(6);
        residual << 3, -4, 1, 0.5, 0.2, -0.1;  // halves (3,-4,1) and (0.5,0.2,-0.1)
        const Eigen::VectorXd sent = bank.apply(0, residual);
        Eigen::VectorXd expect(6);
        expect << 0, -4, 0, 0.5, 0, 0;
        CHECK(sent == expect);
        CHECK(bank.bits_accumulated() == 2 * (2 + 64));  // two R^3 messages
    }
}

TEST_CASE("tracking on the quadratic instance converges below 1e-8") {
    RunParams params = reference_params();
    params.algorithm = Algorithm::tracking;
    params.T = 500;
    params.threshold = 1e-8;
    Engine engine(Graph::ring(10), small_quadratic(10, 5, 11), params, 11);
    const RunResult res = engine.run();
    CHECK(res.final.grad_norm < 1e-8);
    CHECK(res.iterations_to_threshold > 0);
    CHECK(res.iterations_to_threshold <= 500);
}

TEST_CASE("identity compressor with fresh variant collapses onto tracking") {
    RunParams tracking = reference_params();
    tracking.algorithm = Algorithm::tracking;
    RunParams collapsed = reference_params();
    collapsed.algorithm = Algorithm::coral;
    collapsed.compressor = CompressorKind::identity;
    collapsed.variant = ZhatVariant::fresh;

    Engine a(Graph::ring(5), small_quadratic(5, 3, 21), tracking, 21);
    Engine b(Graph::ring(5), small_quadratic(5, 3, 21), collapsed, 21);
    double max_dev = 0.0;
    for (int t = 0; t < 100; ++t) {
        a.step_round();
        b.step_round();
        max_dev = std::max(max_dev, (a.x_stacked() - b.x_stacked()).cwiseAbs().maxCoeff());
        max_dev = std::max(max_dev, (a.z_stacked() - b.z_stacked()).cwiseAbs().maxCoeff());
    }
    CHECK(max_dev <= 1e-12);
}

TEST_CASE("apply-incoming corner cases through full rounds") {
    SUBCASE("alpha -> 0 freezes the edge state") {
        RunParams params = reference_params();
        params.alpha = 1e-300;  // alpha = 0 is outside the validated range
        params.compressor = CompressorKind::rand_k;
        Engine engine(Graph::ring(4), small_quadratic(4, 2, 3), params, 3);
        Eigen::VectorXd z0 = engine.z_stacked();
        engine.step_round();
        CHECK((engine.z_stacked() - z0).cwiseAbs().maxCoeff() < 1e-250);
    }
    SUBCASE("alpha near 1 with identity jumps to the incoming nominal message") {
        RunParams params = reference_params();
        params.alpha = 1.0 - 1e-12;
        params.compressor = CompressorKind::identity;
        const auto problem = small_quadratic(3, 2, 5);
        const Graph g = Graph::ring(3);
        Engine engine(g, problem, params, 5);
        // Reconstruct the expected z by evaluating the nominal messages of
        // the pre-round state by hand.
        const Eigen::VectorXd x0 = engine.x_stacked();
        std::vector<Eigen::VectorXd> ys(3);
        for (int i = 0; i < 3; ++i) {
            Eigen::VectorXd y(2), s(2);
            const Eigen::VectorXd xi = x0.segment(2 * i, 2);
            const Eigen::VectorXd zero = Eigen::VectorXd::Zero(4);
            std::vector<const Eigen::VectorXd*> zp = {&zero, &zero};
            local_averaging_step(xi, problem->local_gradient(i, xi), zp, params.rho, y, s);
            ys[i].resize(4);
            ys[i] << y, s;
        }
        engine.step_round();
        const Eigen::VectorXd z1 = engine.z_stacked();
        for (int k = 0; k < g.total_degree(); ++k) {
            const int j = g.pairs()[k].second;  // owner of the reverse pair
            const Eigen::VectorXd expect = 2 * params.rho * ys[j];  // -z0 + 2 rho [y;s], z0 = 0
            CHECK((z1.segment(4 * k, 4) - expect).cwiseAbs().maxCoeff() < 1e-11);
        }
    }
}

TEST_CASE("runs are bit-identical under a fixed master seed") {
    RunParams params = reference_params();
    params.compressor = CompressorKind::rand_k;
    params.compressor_k = 2;
    params.T = 60;
    const auto problem = small_quadratic(6, 3, 17);
    Engine a(Graph::ring(6), problem, params, 17);
    Engine b(Graph::ring(6), problem, params, 17);
    const RunResult ra = a.run(), rb = b.run();
    REQUIRE(ra.rows.size() == rb.rows.size());
    for (std::size_t r = 0; r < ra.rows.size(); ++r) {
        CHECK(ra.rows[r].grad_norm == rb.rows[r].grad_norm);
        CHECK(ra.rows[r].consensus_err == rb.rows[r].consensus_err);
        CHECK(ra.rows[r].objective == rb.rows[r].objective);
        CHECK(ra.rows[r].bits == rb.rows[r].bits);
    }
    CHECK(a.x_stacked() == b.x_stacked());
    CHECK(a.z_stacked() == b.z_stacked());
    CHECK(a.m_stacked() == b.m_stacked());
}

TEST_CASE("replica consistency holds on clean channels") {
    RunParams params = reference_params();
    params.compressor = CompressorKind::rand_k;
    Engine engine(Graph::random_connected(5, 0.7, 29), small_quadratic(5, 3, 29), params, 29);
    for (int t = 0; t < 50; ++t) {
        engine.step_round();
        CHECK(engine.max_replica_deviation() <= 1e-14);
    }
}

TEST_CASE("error-feedback integrators settle on a converged quadratic run") {
    RunParams params = reference_params();
    params.compressor = CompressorKind::rand_k;
    params.T = 4000;
    Engine engine(Graph::ring(10), small_quadratic(10, 5, 31), params, 31);
    engine.run();
    CHECK(engine.max_error_feedback_residual() < 1e-6);
}

TEST_CASE("run respects horizon and logging cadence") {
    RunParams params = reference_params();
    SUBCASE("T = 0 leaves only the initial row") {
        params.T = 0;
        Engine engine(Graph::ring(3), small_quadratic(3, 2, 1), params, 1);
        const RunResult res = engine.run();
        REQUIRE(res.rows.size() == 1);
        CHECK(res.rows[0].t == 0);
        CHECK(res.rows[0].bits == 0);
        CHECK(res.final.t == 0);
    }
    SUBCASE("T = 10 with log_every = 5 logs t in {0, 5, 10}") {
        params.T = 10;
        params.log_every = 5;
        Engine engine(Graph::ring(3), small_quadratic(3, 2, 1), params, 1);
        const RunResult res = engine.run();
        REQUIRE(res.rows.size() == 3);
        CHECK(res.rows[0].t == 0);
        CHECK(res.rows[1].t == 5);
        CHECK(res.rows[2].t == 10);
    }
}

TEST_CASE("bits accounting: d messages per round at fixed per-message cost") {
    const Graph g = Graph::ring(6);  // 12 directed pairs
    const auto problem = small_quadratic(6, 4, 2);
    SUBCASE("tracking sends dense 2n blocks") {
        RunParams params = reference_params();
        params.algorithm = Algorithm::tracking;
        params.T = 7;
        Engine engine(g, problem, params, 2);
        const RunResult res = engine.run();
        for (const RoundTrace& row : res.rows)
            CHECK(row.bits == static_cast<std::uint64_t>(row.t) * 12 * (8 * 64));
    }
    SUBCASE("rand_2 sends two indexed coordinates per message") {
        RunParams params = reference_params();
        params.compressor = CompressorKind::rand_k;
        params.compressor_k = 2;
        params.T = 7;
        Engine engine(g, problem, params, 2);
        const RunResult res = engine.run();
        // ceil(log2 8) = 3 index bits per coordinate
        for (const RoundTrace& row : res.rows)
            CHECK(row.bits == static_cast<std::uint64_t>(row.t) * 12 * 2 * (3 + 64));
    }
}

TEST_CASE("noisy channels keep trajectories bounded with a finite plateau") {
    RunParams params = reference_params();
    params.compressor = CompressorKind::rand_k;
    params.noise_std = std::sqrt(1e-3);
    params.T = 400;
    Engine engine(Graph::ring(5), small_quadratic(5, 3, 13), params, 13);
    const RunResult res = engine.run();
    CHECK(std::isfinite(res.final.grad_norm));
    CHECK(engine.x_stacked().allFinite());
    // The replica offset now integrates the injected noise, so the replica
    // deviation must be nonzero (the clean-channel identity no longer holds).
    CHECK(engine.max_replica_deviation() > 0.0);
}

TEST_CASE("divergence guard raises with the failing iteration index") {
    RunParams params = reference_params();
    params.algorithm = Algorithm::tracking;
    params.delta = 1e9;  // force blow-up; triggers the range warning only
    params.T = 200;
    Engine engine(Graph::ring(3), small_quadratic(3, 2, 9), params, 9);
    try {
        engine.run();
        FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
        CHECK(e.iteration() >= 1);
        CHECK(std::string(e.what()).find("diverged") != std::string::npos);
    }
}

TEST_CASE("parameter validation rejects out-of-range values") {
    const auto problem = small_quadratic(3, 2, 1);
    auto expect_throw = [&](RunParams p) { CHECK_THROWS_AS(p.validate(*problem), std::invalid_argument); };
    RunParams p = reference_params();
    p.gamma = 0.0;
    expect_throw(p);
    p = reference_params();
    p.gamma = 1.0;
    expect_throw(p);
    p = reference_params();
    p.alpha = 1.5;
    expect_throw(p);
    p = reference_params();
    p.rho = -0.1;
    expect_throw(p);
    p = reference_params();
    p.delta = 0.0;
    expect_throw(p);
    p = reference_params();
    p.T = -1;
    expect_throw(p);
    p = reference_params();
    p.noise_std = -1e-3;
    expect_throw(p);
    p = reference_params();
    p.compressor_k = 0;
    expect_throw(p);
    // delta above the nominal range is a warning, not an error
    p = reference_params();
    p.delta = 1e9;
    CHECK_NOTHROW(p.validate(*problem));
}

TEST_CASE("literal and fresh variants genuinely differ under compression") {
    RunParams fresh = reference_params();
    fresh.compressor = CompressorKind::rand_k;
    RunParams literal = fresh;
    literal.variant = ZhatVariant::literal;
    const auto problem = small_quadratic(4, 2, 77);
    Engine a(Graph::ring(4), problem, fresh, 77);
    Engine b(Graph::ring(4), problem, literal, 77);
    for (int t = 0; t < 10; ++t) {
        a.step_round();
        b.step_round();
    }
    CHECK((a.z_stacked() - b.z_stacked()).cwiseAbs().maxCoeff() > 1e-12);
}

TEST_CASE("changing the compressor seed leaves the initial state untouched") {
    RunParams params = reference_params();
    params.compressor = CompressorKind::rand_k;
    const auto problem = small_quadratic(4, 3, 55);
    Engine a(Graph::ring(4), problem, params, 55);
    Engine b(Graph::ring(4), problem, params, 55, 9999);
    CHECK(a.x_stacked() == b.x_stacked());
    a.step_round();
    b.step_round();
    CHECK((a.m_stacked() - b.m_stacked()).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("string conversions for engine enums") {
    CHECK(to_string(algorithm_from_string("tracking")) == "tracking");
    CHECK(to_string(algorithm_from_string("coral")) == "coral");
    CHECK(zhat_variant_from_string("literal") == ZhatVariant::literal);
    CHECK(zhat_variant_from_string("fresh") == ZhatVariant::fresh);
    CHECK(compress_scope_from_string("block") == CompressScope::block);
    CHECK_THROWS(algorithm_from_string("admm"));
    CHECK_THROWS(zhat_variant_from_string("stale"));
}
