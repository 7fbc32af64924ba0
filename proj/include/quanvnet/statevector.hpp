// Dense statevector simulation of small quantum circuits over the gate set
// {H, RZ, CNOT}, with exact measurement probabilities and seeded shot
// sampling.
//
// Conventions (fixed for the whole project):
//   - qubit 0 is the least-significant bit of a basis-state index
//   - RZ(theta) = diag(e^{-i theta/2}, e^{+i theta/2})
//   - states are unit-norm vectors of length 2^n
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "quanvnet/rng.hpp"

namespace quanvnet {

using cdouble = std::complex<double>;

// Dense amplitude cap: 2^25 complex doubles (512 MiB). Circuits in this
// project never exceed 25 qubits.
inline constexpr int kMaxQubits = 25;

struct Statevector {
    int num_qubits = 0;
    std::vector<cdouble> amplitudes;
};

enum class GateKind { H, RZ, CNOT };

struct Gate {
    GateKind kind;
    int target = 0;   // acted-on qubit (H, RZ) or CNOT target
    int control = -1; // CNOT only
    double angle = 0.0; // RZ only, radians

    static Gate h(int qubit) { return Gate{GateKind::H, qubit, -1, 0.0}; }
    static Gate rz(int qubit, double angle) { return Gate{GateKind::RZ, qubit, -1, angle}; }
    static Gate cnot(int control, int target) { return Gate{GateKind::CNOT, target, control, 0.0}; }
};

struct Circuit {
    int num_qubits = 0;
    std::vector<Gate> gates;
};

struct ShotHistogram {
    int num_qubits = 0;
    std::map<std::uint64_t, std::uint64_t> counts; // basis index -> count
    std::uint64_t total_shots = 0;
};

inline Statevector zero_state(int num_qubits) {
    if (num_qubits < 1 || num_qubits > kMaxQubits)
        throw std::invalid_argument("zero_state: qubit count must be in [1, " +
                                    std::to_string(kMaxQubits) + "], got " +
                                    std::to_string(num_qubits));
    Statevector sv;
    sv.num_qubits = num_qubits;
    sv.amplitudes.assign(std::size_t(1) << num_qubits, cdouble(0.0, 0.0));
    sv.amplitudes[0] = cdouble(1.0, 0.0);
    return sv;
}

namespace detail {

inline void check_qubit(int qubit, int num_qubits, const char* what) {
    if (qubit < 0 || qubit >= num_qubits)
        throw std::out_of_range(std::string(what) + ": qubit index " +
                                std::to_string(qubit) + " out of range for " +
                                std::to_string(num_qubits) + " qubits");
}

inline void apply_h(std::vector<cdouble>& amp, int qubit) {
    const std::size_t mask = std::size_t(1) << qubit;
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (std::size_t i = 0; i < amp.size(); ++i) {
        if ((i & mask) == 0) {
            const cdouble a = amp[i];
            const cdouble b = amp[i | mask];
            amp[i] = (a + b) * inv_sqrt2;
            amp[i | mask] = (a - b) * inv_sqrt2;
        }
    }
}

inline void apply_rz(std::vector<cdouble>& amp, int qubit, double angle) {
    const std::size_t mask = std::size_t(1) << qubit;
    const cdouble phase0 = std::polar(1.0, -angle / 2.0);
    const cdouble phase1 = std::polar(1.0, +angle / 2.0);
    for (std::size_t i = 0; i < amp.size(); ++i)
        amp[i] *= (i & mask) ? phase1 : phase0;
}

inline void apply_cnot(std::vector<cdouble>& amp, int control, int target) {
    const std::size_t cmask = std::size_t(1) << control;
    const std::size_t tmask = std::size_t(1) << target;
    for (std::size_t i = 0; i < amp.size(); ++i) {
        if ((i & cmask) && !(i & tmask))
            std::swap(amp[i], amp[i | tmask]);
    }
}

inline void apply_gate_in_place(std::vector<cdouble>& amp, int num_qubits, const Gate& gate) {
    switch (gate.kind) {
    case GateKind::H:
        check_qubit(gate.target, num_qubits, "H");
        apply_h(amp, gate.target);
        break;
    case GateKind::RZ:
        check_qubit(gate.target, num_qubits, "RZ");
        if (!std::isfinite(gate.angle))
            throw std::invalid_argument("RZ: angle must be finite");
        apply_rz(amp, gate.target, gate.angle);
        break;
    case GateKind::CNOT:
        check_qubit(gate.control, num_qubits, "CNOT control");
        check_qubit(gate.target, num_qubits, "CNOT target");
        if (gate.control == gate.target)
            throw std::invalid_argument("CNOT: control and target must be distinct");
        apply_cnot(amp, gate.control, gate.target);
        break;
    }
}

} // namespace detail

inline Statevector apply_gate(const Statevector& state, const Gate& gate) {
    Statevector out = state;
    detail::apply_gate_in_place(out.amplitudes, out.num_qubits, gate);
    return out;
}

inline Statevector apply_circuit(const Statevector& state, const Circuit& circuit) {
    if (circuit.num_qubits != state.num_qubits)
        throw std::invalid_argument("apply_circuit: circuit is for " +
                                    std::to_string(circuit.num_qubits) +
                                    " qubits, state has " +
                                    std::to_string(state.num_qubits));
    Statevector out = state;
    for (const Gate& g : circuit.gates)
        detail::apply_gate_in_place(out.amplitudes, out.num_qubits, g);
    return out;
}

inline std::vector<double> exact_probabilities(const Statevector& state) {
    std::vector<double> probs(state.amplitudes.size());
    for (std::size_t i = 0; i < probs.size(); ++i)
        probs[i] = std::norm(state.amplitudes[i]);
    return probs;
}

// Multinomial draw from the exact distribution via inverse-CDF sampling on a
// hand-rolled uniform stream, so the histogram is a pure function of
// (state, shots, seed).
inline ShotHistogram sample_shots(const Statevector& state, std::uint64_t shots,
                                  std::uint64_t seed) {
    if (shots == 0)
        throw std::invalid_argument("sample_shots: shot count must be >= 1");
    const std::vector<double> probs = exact_probabilities(state);
    std::vector<double> cdf(probs.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        cdf[i] = acc;
    }
    cdf.back() = 1.0; // guard against rounding shortfall

    ShotHistogram hist;
    hist.num_qubits = state.num_qubits;
    hist.total_shots = shots;
    std::mt19937_64 rng(seed);
    for (std::uint64_t s = 0; s < shots; ++s) {
        const double u = uniform_unit(rng);
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        const std::size_t idx = std::size_t(it - cdf.begin());
        ++hist.counts[idx];
    }
    return hist;
}

// Per-qubit probability of measuring |1>.
inline std::vector<double> one_probabilities(const Statevector& state) {
    std::vector<double> out(state.num_qubits, 0.0);
    for (std::size_t i = 0; i < state.amplitudes.size(); ++i) {
        const double p = std::norm(state.amplitudes[i]);
        if (p == 0.0) continue;
        for (int q = 0; q < state.num_qubits; ++q)
            if (i & (std::size_t(1) << q)) out[q] += p;
    }
    return out;
}

// P(|00>) + P(|11>) on a 2-qubit state; the quantity f(theta, beta) of the
// two-qubit QAOA analysis.
inline double same_state_probability(const Statevector& state) {
    if (state.num_qubits != 2)
        throw std::invalid_argument("same_state_probability: expected a 2-qubit state, got " +
                                    std::to_string(state.num_qubits) + " qubits");
    return std::norm(state.amplitudes[0]) + std::norm(state.amplitudes[3]);
}

} // namespace quanvnet
