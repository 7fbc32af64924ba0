#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "quanvnet/csv.hpp"
#include "quanvnet/qaoa.hpp"
#include "quanvnet/statevector.hpp"

using namespace quanvnet;

namespace {
constexpr double pi = 3.14159265358979323846;
}

TEST_CASE("load_topology parses the minimal graph") {
    const DeviceTopology t = load_topology("qubits=2\nedge=0,1\n");
    CHECK(t.num_qubits == 2);
    REQUIRE(t.edges.size() == 1);
    CHECK(t.edges[0] == std::make_pair(0, 1));
}

TEST_CASE("load_topology keeps file order and endpoint direction") {
    const DeviceTopology t =
        load_topology("# comment\nqubits=4\n\nedge=2,1\nedge=0,3\nedge=1,0\n");
    REQUIRE(t.edges.size() == 3);
    CHECK(t.edges[0] == std::make_pair(2, 1)); // direction as written: RZ lands on .second
    CHECK(t.edges[1] == std::make_pair(0, 3));
    CHECK(t.edges[2] == std::make_pair(1, 0));
}

TEST_CASE("load_topology validation") {
    CHECK_THROWS_WITH_AS(load_topology("qubits=2\nedge=0,0\n"),
                         doctest::Contains("self-loop"), std::runtime_error);
    CHECK_THROWS_WITH_AS(load_topology("qubits=2\nedge=0,1\nedge=1,0\n"),
                         doctest::Contains("duplicate"), std::runtime_error);
    CHECK_THROWS_WITH_AS(load_topology("qubits=2\nedge=0,2\n"),
                         doctest::Contains("out of range"), std::runtime_error);
    CHECK_THROWS_AS(load_topology("edge=0,1\n"), std::runtime_error);
    CHECK_THROWS_AS(load_topology(""), std::runtime_error);
    CHECK_THROWS_AS(load_topology("qubits=0\n"), std::runtime_error);
}

TEST_CASE("bundled topology: 25 qubits, 24 edges, file matches the embedded text") {
    const DeviceTopology t = aspen25_topology();
    CHECK(t.num_qubits == 25);
    CHECK(t.edges.size() == 24);

    const std::string file_text = read_text_file(std::string(QVN_DATA_DIR) + "/aspen25.topo");
    CHECK(file_text == aspen25_topology_text());
    const DeviceTopology from_file = load_topology_file(std::string(QVN_DATA_DIR) + "/aspen25.topo");
    CHECK(from_file.edges == t.edges);
}

TEST_CASE("random_weighted_graph: determinism, range, seed sensitivity") {
    const DeviceTopology t = aspen25_topology();
    const WeightedGraph a = random_weighted_graph(t, 5);
    const WeightedGraph b = random_weighted_graph(t, 5);
    CHECK(a.weights == b.weights);

    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const WeightedGraph g = random_weighted_graph(t, seed);
        REQUIRE(g.weights.size() == 24);
        for (double w : g.weights) {
            CHECK(w >= 0.1);
            CHECK(w <= 1.0);
        }
    }

    std::set<std::vector<double>> distinct;
    for (std::uint64_t seed = 0; seed < 64; ++seed)
        distinct.insert(random_weighted_graph(t, seed).weights);
    CHECK(distinct.size() == 64);
}

TEST_CASE("parameter_count = (|E|+1) * p") {
    const DeviceTopology aspen = aspen25_topology();
    CHECK(parameter_count(aspen, 1) == 25);
    CHECK(parameter_count(aspen, 4) == 100);

    for (int p = 1; p <= 4; ++p) {
        for (int extra = 0; extra < 4; ++extra) {
            std::string text = "qubits=6\n";
            const char* edges[] = {"edge=0,1\n", "edge=1,2\n", "edge=2,3\n", "edge=3,4\n"};
            for (int e = 0; e <= extra; ++e) text += edges[e];
            const DeviceTopology t = load_topology(text);
            CHECK(parameter_count(t, p) == (t.edges.size() + 1) * std::size_t(p));
        }
    }
    CHECK_THROWS_AS(parameter_count(aspen, 0), std::invalid_argument);
}

TEST_CASE("build_qaoa_circuit: two-qubit structure is 11 gates in appendix order") {
    const DeviceTopology t = load_topology("qubits=2\nedge=0,1\n");
    const WeightedGraph g{t, {1.0}};
    const QaoaAnsatz ansatz{g, 1};
    const double params[2] = {0.7, 0.3};
    const Circuit c = build_qaoa_circuit(ansatz, params);

    REQUIRE(c.gates.size() == 11);
    const GateKind expected[11] = {GateKind::H,    GateKind::H,  GateKind::CNOT, GateKind::RZ,
                                   GateKind::CNOT, GateKind::H,  GateKind::RZ,   GateKind::H,
                                   GateKind::H,    GateKind::RZ, GateKind::H};
    for (int i = 0; i < 11; ++i) CHECK(c.gates[std::size_t(i)].kind == expected[i]);
    CHECK(c.gates[3].target == 1); // cost RZ acts on the edge's second qubit
    CHECK(c.gates[3].angle == doctest::Approx(0.7));
    CHECK(c.gates[6].angle == doctest::Approx(0.3));
    CHECK(c.gates[9].angle == doctest::Approx(0.3));

    const double bad[3] = {0.1, 0.2, 0.3};
    CHECK_THROWS_AS(build_qaoa_circuit(ansatz, bad), std::invalid_argument);
}

TEST_CASE("build_qaoa_circuit reproduces the appendix composition through the oracle") {
    const DeviceTopology t = load_topology("qubits=2\nedge=0,1\n");
    const WeightedGraph g{t, {1.0}};
    const QaoaAnsatz ansatz{g, 1};
    for (int i = 0; i < 12; ++i) {
        for (int j = 0; j < 6; ++j) {
            const double theta = 2.0 * pi * double(i) / 12.0;
            const double beta = pi * double(j) / 6.0;
            const double params[2] = {theta, beta};
            const Circuit c = build_qaoa_circuit(ansatz, params);
            const double f = same_state_probability(apply_circuit(zero_state(2), c));
            CHECK(std::abs(f - 0.5 * (1.0 + std::sin(theta) * std::sin(2.0 * beta))) < 1e-9);
        }
    }
}

TEST_CASE("multi-layer parameter binding: each layer consumes its own edge and driver angles") {
    const DeviceTopology t = load_topology("qubits=2\nedge=0,1\n");
    const WeightedGraph g{t, {0.5}};
    const QaoaAnsatz ansatz{g, 2};
    const double params[4] = {1.0, 0.25, 0.125, 0.75}; // theta1, beta1, theta2, beta2
    const Circuit c = build_qaoa_circuit(ansatz, params);
    REQUIRE(c.gates.size() == 2 + 2 * (3 + 6));

    // Layer 1: cost RZ at index 3 uses w * theta1; drivers at 6 and 9 use beta1.
    CHECK(c.gates[3].angle == doctest::Approx(0.5 * 1.0));
    CHECK(c.gates[6].angle == doctest::Approx(0.25));
    CHECK(c.gates[9].angle == doctest::Approx(0.25));
    // Layer 2 starts after 11 gates: cost RZ at 12, drivers at 15 and 18.
    CHECK(c.gates[12].angle == doctest::Approx(0.5 * 0.125));
    CHECK(c.gates[15].angle == doctest::Approx(0.75));
    CHECK(c.gates[18].angle == doctest::Approx(0.75));
}

TEST_CASE("gate inventory: n + p (3|E| + 3n) gates for p layers") {
    const DeviceTopology t = load_topology("qubits=5\nedge=0,1\nedge=1,2\nedge=3,4\n");
    const WeightedGraph g = random_weighted_graph(t, 9);
    for (int p = 1; p <= 4; ++p) {
        const QaoaAnsatz ansatz{g, p};
        const std::vector<double> params(parameter_count(ansatz), 0.25);
        const Circuit c = build_qaoa_circuit(ansatz, params);
        CHECK(c.gates.size() == 5 + std::size_t(p) * (3 * 3 + 3 * 5));
        CHECK(c.num_qubits == 5);
    }
}

TEST_CASE("edge weight scales the bound angle: (2w, theta/2) leaves gates unchanged") {
    const DeviceTopology t = load_topology("qubits=3\nedge=0,1\nedge=1,2\n");
    const WeightedGraph g1{t, {0.4, 0.8}};
    const WeightedGraph g2{t, {0.8, 1.6}};
    const std::vector<double> p1 = {0.6, 1.0, 0.9};
    const std::vector<double> p2 = {0.3, 0.5, 0.9};
    const Circuit c1 = build_qaoa_circuit(QaoaAnsatz{g1, 1}, p1);
    const Circuit c2 = build_qaoa_circuit(QaoaAnsatz{g2, 1}, p2);
    REQUIRE(c1.gates.size() == c2.gates.size());
    for (std::size_t i = 0; i < c1.gates.size(); ++i) {
        CHECK(c1.gates[i].kind == c2.gates[i].kind);
        CHECK(c1.gates[i].angle == doctest::Approx(c2.gates[i].angle).epsilon(1e-15));
    }
}

TEST_CASE("circuit_depth: greedy layering") {
    CHECK(circuit_depth(Circuit{3, {}}) == 0);

    Circuit parallel{2, {Gate::h(0), Gate::h(1)}};
    CHECK(circuit_depth(parallel) == 1);

    Circuit serial{1, {Gate::h(0), Gate::rz(0, 0.1), Gate::h(0)}};
    CHECK(circuit_depth(serial) == 3);

    Circuit mixed{3, {Gate::h(0), Gate::cnot(0, 1), Gate::cnot(1, 2), Gate::h(0)}};
    // h(0)=1, cnot(0,1)=2, cnot(1,2)=3, h(0)=3
    CHECK(circuit_depth(mixed) == 3);
}

TEST_CASE("default topology at p=1: 25 parameters and depth near 40") {
    const DeviceTopology t = aspen25_topology();
    const WeightedGraph g = random_weighted_graph(t, 1);
    const QaoaAnsatz ansatz{g, 1};
    CHECK(parameter_count(ansatz) == 25);
    const std::vector<double> params(25, 0.5);
    const Circuit c = build_qaoa_circuit(ansatz, params);
    const int depth = circuit_depth(c);
    CHECK(depth >= 30);
    CHECK(depth <= 50);
    MESSAGE("default topology p=1 compiled depth: ", depth);
}
