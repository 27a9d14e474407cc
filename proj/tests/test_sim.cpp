#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "qmt/circuit.hpp"
#include "qmt/diagram.hpp"
#include "qmt/grammar.hpp"
#include "qmt/sim.hpp"
#include "test_circuits_util.hpp"
#include "test_paths.hpp"

using namespace qmt;
using namespace qmt_test;

namespace {

BoundCircuit bell() {
    BoundCircuit c;
    c.n_qubits = 2;
    c.gates = {{GateKind::H, 0, -1, 0.0, -1}, {GateKind::CNOT, 0, 1, 0.0, -1}};
    return c;
}

}  // namespace

TEST_CASE("qubit 0 is the most significant bit") {
    BoundCircuit c;
    c.n_qubits = 2;
    c.gates = {{GateKind::RX, 0, -1, std::numbers::pi, -1}};
    auto d = exact_distribution(c);
    REQUIRE(d.mass.size() == 1);
    CHECK(d.mass.count("10") == 1);
    CHECK(d.mass.at("10") == doctest::Approx(1.0).epsilon(1e-12));

    c.gates = {{GateKind::RX, 1, -1, std::numbers::pi, -1}};
    d = exact_distribution(c);
    CHECK(d.mass.count("01") == 1);
}

TEST_CASE("gate definitions match their matrix forms") {
    // RX(pi/2) from |0>: amplitudes (cos, -i sin) at pi/4
    Statevector sv(1);
    sv.rx(0, std::numbers::pi / 2);
    CHECK(sv.amps()[0].real() == doctest::Approx(std::cos(std::numbers::pi / 4)).epsilon(1e-15));
    CHECK(sv.amps()[1].imag() == doctest::Approx(-std::sin(std::numbers::pi / 4)).epsilon(1e-15));

    // RZ applies opposite phases to |0> and |1>
    Statevector sz(1);
    sz.h(0);
    sz.rz(0, 1.0);
    CHECK(std::arg(sz.amps()[0]) == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(std::arg(sz.amps()[1]) == doctest::Approx(0.5).epsilon(1e-12));

    // CRZ is diagonal and only phases control-1 components
    Statevector sc(2);
    sc.h(0);
    sc.h(1);
    sc.crz(0, 1, 2.0);
    CHECK(std::arg(sc.amps()[0]) == doctest::Approx(0.0));
    CHECK(std::arg(sc.amps()[1]) == doctest::Approx(0.0));
    CHECK(std::arg(sc.amps()[2]) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(std::arg(sc.amps()[3]) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("norm is preserved after every gate") {
    Rng rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        int n = 1 + static_cast<int>(rng.uniform_index(4));
        auto c = random_bound_circuit(rng, n, 30);
        Statevector sv(n);
        for (const auto& g : c.gates) {
            sv.apply(g);
            CHECK(std::abs(sv.norm() - 1.0) <= 1e-9);
        }
    }
}

TEST_CASE("statevector matches the dense matrix-product oracle") {
    Rng rng(4242);
    for (int trial = 0; trial < 100; ++trial) {
        int n = 1 + static_cast<int>(rng.uniform_index(3));
        auto c = random_bound_circuit(rng, n, 25);
        auto got = run_statevector(c).amps();
        auto want = dense_oracle_state(c);
        REQUIRE(got.size() == want.size());
        for (size_t i = 0; i < got.size(); ++i)
            CHECK(std::abs(got[i] - want[i]) <= 1e-10);
    }
}

TEST_CASE("qubit count is guarded") {
    CHECK_THROWS_AS(Statevector(21), CapacityError);
    CHECK_NOTHROW(Statevector(1));
}

TEST_CASE("Bell state distribution and post-selection") {
    auto d = exact_distribution(bell());
    REQUIRE(d.mass.size() == 2);
    CHECK(d.mass.at("00") == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(d.mass.at("11") == doctest::Approx(0.5).epsilon(1e-12));

    auto post = postselect(d, {1});
    REQUIRE(post.n_qubits == 1);
    REQUIRE(post.mass.size() == 1);
    CHECK(post.mass.at("0") == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("post-selection renormalizes marginals exactly") {
    Rng rng(7);
    auto c = random_bound_circuit(rng, 3, 20);
    auto d = exact_distribution(c);
    auto post = postselect(d, {0, 2});
    CHECK(post.total() == doctest::Approx(1.0).epsilon(1e-12));
    // manual marginal
    double kept = 0.0;
    std::map<std::string, double> manual;
    for (const auto& [k, p] : d.mass) {
        if (k[0] != '0' || k[2] != '0') continue;
        manual[std::string(1, k[1])] += p;
        kept += p;
    }
    for (auto& [k, p] : manual) CHECK(post.mass.at(k) == doctest::Approx(p / kept).epsilon(1e-12));
}

TEST_CASE("post-selection with no surviving mass fails") {
    BoundCircuit c;
    c.n_qubits = 1;
    c.gates = {{GateKind::RX, 0, -1, std::numbers::pi, -1}};  // |1> certainly
    auto d = exact_distribution(c);
    CHECK_THROWS_AS(postselect(d, {0}), PreconditionError);
}

TEST_CASE("sampling is seeded and deterministic") {
    auto c = bell();
    auto a = sample(c, 2000, 5);
    auto b = sample(c, 2000, 5);
    CHECK(a.mass == b.mass);
    auto other = sample(c, 2000, 6);
    CHECK(a.mass != other.mass);
    CHECK(a.shots == 2000);
    double total = 0;
    for (auto& [k, p] : a.mass) total += p;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sampling converges within the stated TV bound") {
    Rng rng(31337);
    for (int trial = 0; trial < 10; ++trial) {
        int n = 1 + static_cast<int>(rng.uniform_index(4));
        auto c = random_bound_circuit(rng, n, 25);
        auto exact = exact_distribution(c);
        long long shots = 20000;
        auto approx = sample(c, shots, rng.next_u64());
        double bound = 3.0 * std::sqrt(static_cast<double>(size_t(1) << n) /
                                       static_cast<double>(shots));
        CHECK(total_variation(exact, approx) <= bound);
    }
}

TEST_CASE("distribution CSV round-trips sorted bitstrings") {
    auto d = exact_distribution(bell());
    auto csv = distribution_csv(d);
    CHECK(csv.rfind("outcome,p\n", 0) == 0);
    CHECK(csv.find("\n00,") != std::string::npos);  // lines keyed by bitstring
    CHECK(csv.find("\n11,") != std::string::npos);
    CHECK(csv.find("\n00,") < csv.find("\n11,"));
    auto again = distribution_from_csv(csv);
    CHECK(again.mass.size() == d.mass.size());
    for (const auto& [k, p] : d.mass) CHECK(again.mass.at(k) == doctest::Approx(p).epsilon(1e-15));
}

TEST_CASE("compiled sentence circuit simulates and post-selects") {
    auto lexicon = Lexicon::load_json(test_path("data/lexicon.json"));
    auto reg = init_params(lexicon, 1);
    auto ts = assign_types("Sara sees Bob", lexicon, "en");
    auto circuit = compile(build_diagram(ts, reduce(ts)), reg);
    auto bound = bind(circuit, reg);
    auto d = exact_distribution(bound);
    CHECK(d.n_qubits == 5);
    CHECK(d.total() == doctest::Approx(1.0).epsilon(1e-9));
    auto sentence = postselect(d, bound.postselect);
    CHECK(sentence.n_qubits == 1);
    CHECK(sentence.total() == doctest::Approx(1.0).epsilon(1e-9));
}
