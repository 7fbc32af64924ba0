// QAOA ansatz construction over a device-topology graph.
//
// A quanvolutional filter is a MaxCut-style QAOA circuit on a randomly
// weighted copy of the device graph: a Hadamard wall, then per layer one
// CNOT(a,b)-RZ(w*theta on b)-CNOT(a,b) term per edge in file order, then the
// driver H-RZ(beta)-H on every qubit. One parameter per edge plus one driver
// parameter per layer, so parameter_count = (|E| + 1) * p.
#pragma once

#include <cstdint>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "quanvnet/csv.hpp"
#include "quanvnet/rng.hpp"
#include "quanvnet/statevector.hpp"

namespace quanvnet {

struct DeviceTopology {
    int num_qubits = 0;
    std::vector<std::pair<int, int>> edges; // file order; (a,b) with a != b
};

struct WeightedGraph {
    DeviceTopology topology;
    std::vector<double> weights; // one per edge, finite and nonzero
};

struct QaoaAnsatz {
    WeightedGraph graph;
    int layers = 1; // p
};

inline std::size_t parameter_count(const DeviceTopology& topology, int layers) {
    if (layers < 1)
        throw std::invalid_argument("parameter_count: layer count must be >= 1");
    return (topology.edges.size() + 1) * std::size_t(layers);
}

inline std::size_t parameter_count(const QaoaAnsatz& ansatz) {
    return parameter_count(ansatz.graph.topology, ansatz.layers);
}

// Parses the topology text format:
//   line 1          qubits=<n>
//   following lines edge=<a>,<b>
// Blank lines and lines starting with '#' are ignored. Edge order in the
// file is the significance order used for parameter binding.
inline DeviceTopology load_topology(const std::string& text) {
    DeviceTopology topo;
    bool have_qubits = false;
    std::set<std::pair<int, int>> seen;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        const std::string line = trim(text.substr(pos, eol - pos));
        pos = eol + 1;
        ++line_no;
        if (line.empty() || line[0] == '#') {
            if (pos > text.size()) break;
            continue;
        }
        const auto fail = [&](const std::string& msg) {
            throw std::runtime_error("topology line " + std::to_string(line_no) + ": " + msg);
        };
        if (!have_qubits) {
            if (line.rfind("qubits=", 0) != 0) fail("expected 'qubits=<n>' first");
            try {
                topo.num_qubits = std::stoi(line.substr(7));
            } catch (const std::exception&) {
                fail("bad qubit count '" + line.substr(7) + "'");
            }
            if (topo.num_qubits < 1) fail("qubit count must be >= 1");
            have_qubits = true;
        } else {
            if (line.rfind("edge=", 0) != 0) fail("expected 'edge=<a>,<b>'");
            const auto parts = split_fields(line.substr(5));
            if (parts.size() != 2) fail("expected two comma-separated qubit indices");
            int a = 0, b = 0;
            try {
                a = std::stoi(trim(parts[0]));
                b = std::stoi(trim(parts[1]));
            } catch (const std::exception&) {
                fail("bad edge endpoints '" + line.substr(5) + "'");
            }
            if (a < 0 || a >= topo.num_qubits || b < 0 || b >= topo.num_qubits)
                fail("edge endpoint out of range");
            if (a == b) fail("self-loop edge rejected");
            const auto key = std::minmax(a, b);
            if (!seen.insert(key).second) fail("duplicate edge rejected");
            topo.edges.emplace_back(a, b);
        }
        if (pos > text.size()) break;
    }
    if (!have_qubits) throw std::runtime_error("topology: empty input");
    return topo;
}

inline DeviceTopology load_topology_file(const std::string& path) {
    return load_topology(read_text_file(path));
}

// The bundled 25-qubit, 24-edge device graph: a row of three open octagonal
// rings bridged in sequence plus a tail qubit. Identical to data/aspen25.topo;
// embedded so binaries do not depend on the working directory. Edge order is
// chosen so the greedy-layered p=1 circuit depth lands near 40.
inline std::string aspen25_topology_text() {
    return "# 25-qubit device graph: a row of three open octagonal rings\n"
           "# (qubits 0-7, 8-15, 16-23) bridged at 7-8 and 15-16, plus tail qubit 24.\n"
           "# 25 qubits, 24 two-qubit edges. Edge order interleaves the two halves of\n"
           "# the device so parallel scheduling keeps the compiled p=1 depth near 40.\n"
           "qubits=25\n"
           "edge=0,1\n"
           "edge=12,13\n"
           "edge=1,2\n"
           "edge=13,14\n"
           "edge=2,3\n"
           "edge=14,15\n"
           "edge=3,4\n"
           "edge=15,16\n"
           "edge=4,5\n"
           "edge=16,17\n"
           "edge=5,6\n"
           "edge=17,18\n"
           "edge=6,7\n"
           "edge=18,19\n"
           "edge=7,8\n"
           "edge=19,20\n"
           "edge=8,9\n"
           "edge=20,21\n"
           "edge=9,10\n"
           "edge=21,22\n"
           "edge=10,11\n"
           "edge=22,23\n"
           "edge=11,12\n"
           "edge=23,24\n";
}

inline DeviceTopology aspen25_topology() { return load_topology(aspen25_topology_text()); }

// Edge weights drawn i.i.d. uniform on [0.1, 1.0]; the lower bound keeps
// every edge term active.
inline WeightedGraph random_weighted_graph(const DeviceTopology& topology, std::uint64_t seed) {
    WeightedGraph graph;
    graph.topology = topology;
    graph.weights.reserve(topology.edges.size());
    std::mt19937_64 rng(seed);
    for (std::size_t e = 0; e < topology.edges.size(); ++e)
        graph.weights.push_back(uniform_in(rng, 0.1, 1.0));
    return graph;
}

// Parameter layout: per layer, the |E| edge angles in edge order followed by
// the layer's single driver angle. The edge weight multiplies the bound
// angle: the cost term for edge e at layer l rotates by w_e * theta_{l,e}.
inline Circuit build_qaoa_circuit(const QaoaAnsatz& ansatz, std::span<const double> params) {
    const DeviceTopology& topo = ansatz.graph.topology;
    if (ansatz.layers < 1)
        throw std::invalid_argument("build_qaoa_circuit: layer count must be >= 1");
    if (ansatz.graph.weights.size() != topo.edges.size())
        throw std::invalid_argument("build_qaoa_circuit: weight count does not match edge count");
    const std::size_t expected = parameter_count(ansatz);
    if (params.size() != expected)
        throw std::invalid_argument("build_qaoa_circuit: expected " + std::to_string(expected) +
                                    " parameters, got " + std::to_string(params.size()));

    Circuit circuit;
    circuit.num_qubits = topo.num_qubits;
    const std::size_t num_edges = topo.edges.size();
    circuit.gates.reserve(topo.num_qubits + std::size_t(ansatz.layers) * (3 * num_edges + 3 * topo.num_qubits));

    for (int q = 0; q < topo.num_qubits; ++q)
        circuit.gates.push_back(Gate::h(q));

    for (int layer = 0; layer < ansatz.layers; ++layer) {
        const std::size_t base = std::size_t(layer) * (num_edges + 1);
        for (std::size_t e = 0; e < num_edges; ++e) {
            const auto [a, b] = topo.edges[e];
            const double angle = ansatz.graph.weights[e] * params[base + e];
            circuit.gates.push_back(Gate::cnot(a, b));
            circuit.gates.push_back(Gate::rz(b, angle));
            circuit.gates.push_back(Gate::cnot(a, b));
        }
        const double beta = params[base + num_edges];
        for (int q = 0; q < topo.num_qubits; ++q) {
            circuit.gates.push_back(Gate::h(q));
            circuit.gates.push_back(Gate::rz(q, beta));
            circuit.gates.push_back(Gate::h(q));
        }
    }
    return circuit;
}

// Greedy layering depth: gates are placed in program order, each occupying
// one layer on its qubits; gates on disjoint qubits share a layer. Depth is
// the last occupied layer.
inline int circuit_depth(const Circuit& circuit) {
    std::vector<int> busy(std::size_t(std::max(circuit.num_qubits, 0)), 0);
    int depth = 0;
    for (const Gate& g : circuit.gates) {
        int start = busy[std::size_t(g.target)];
        if (g.kind == GateKind::CNOT)
            start = std::max(start, busy[std::size_t(g.control)]);
        const int layer = start + 1;
        busy[std::size_t(g.target)] = layer;
        if (g.kind == GateKind::CNOT)
            busy[std::size_t(g.control)] = layer;
        depth = std::max(depth, layer);
    }
    return depth;
}

} // namespace quanvnet
