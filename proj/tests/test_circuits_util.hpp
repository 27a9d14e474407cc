#pragma once

// Shared helpers for simulator tests: random bound circuits and a dense
// matrix-product oracle (full 2^n x 2^n gate matrices, built independently of
// the production simulator).

#include <complex>
#include <vector>

#include "qmt/rng.hpp"
#include "qmt/sim.hpp"

namespace qmt_test {

using qmt::Amp;
using qmt::BoundCircuit;
using qmt::BoundGate;
using qmt::GateKind;

inline BoundCircuit random_bound_circuit(qmt::Rng& rng, int n_qubits, int n_gates) {
    BoundCircuit c;
    c.n_qubits = n_qubits;
    for (int i = 0; i < n_gates; ++i) {
        BoundGate g;
        switch (rng.uniform_index(5)) {
            case 0: g.kind = GateKind::RX; break;
            case 1: g.kind = GateKind::RZ; break;
            case 2: g.kind = GateKind::H; break;
            case 3: g.kind = GateKind::CRZ; break;
            default: g.kind = GateKind::CNOT; break;
        }
        g.q0 = static_cast<int>(rng.uniform_index(n_qubits));
        if (g.kind == GateKind::CRZ || g.kind == GateKind::CNOT) {
            if (n_qubits < 2) { g.kind = GateKind::H; }
            else {
                do {
                    g.q1 = static_cast<int>(rng.uniform_index(n_qubits));
                } while (g.q1 == g.q0);
            }
        }
        if (g.kind == GateKind::RX || g.kind == GateKind::RZ || g.kind == GateKind::CRZ)
            g.angle = rng.uniform_angle();
        c.gates.push_back(g);
    }
    return c;
}

inline int bit_of(size_t index, int q, int n) {
    return static_cast<int>((index >> (n - 1 - q)) & 1u);
}

using CMat = std::vector<std::vector<Amp>>;

inline CMat dense_gate_matrix(const BoundGate& g, int n) {
    const size_t dim = size_t(1) << n;
    CMat m(dim, std::vector<Amp>(dim, Amp(0, 0)));

    if (g.kind == GateKind::RX || g.kind == GateKind::RZ || g.kind == GateKind::H) {
        Amp u[2][2];
        if (g.kind == GateKind::RX) {
            double c = std::cos(g.angle / 2), s = std::sin(g.angle / 2);
            u[0][0] = c; u[0][1] = Amp(0, -s);
            u[1][0] = Amp(0, -s); u[1][1] = c;
        } else if (g.kind == GateKind::RZ) {
            u[0][0] = std::polar(1.0, -g.angle / 2); u[0][1] = 0;
            u[1][0] = 0; u[1][1] = std::polar(1.0, g.angle / 2);
        } else {
            double r = 1.0 / std::sqrt(2.0);
            u[0][0] = r; u[0][1] = r;
            u[1][0] = r; u[1][1] = -r;
        }
        for (size_t r = 0; r < dim; ++r)
            for (size_t c = 0; c < dim; ++c) {
                size_t qmask = size_t(1) << (n - 1 - g.q0);
                if ((r & ~qmask) != (c & ~qmask)) continue;
                m[r][c] = u[bit_of(r, g.q0, n)][bit_of(c, g.q0, n)];
            }
        return m;
    }

    if (g.kind == GateKind::CRZ) {
        for (size_t r = 0; r < dim; ++r) {
            if (bit_of(r, g.q0, n) == 0) m[r][r] = 1.0;
            else m[r][r] = std::polar(1.0, (bit_of(r, g.q1, n) ? 1.0 : -1.0) * g.angle / 2);
        }
        return m;
    }

    if (g.kind == GateKind::CNOT) {
        for (size_t c = 0; c < dim; ++c) {
            size_t r = c;
            if (bit_of(c, g.q0, n)) r = c ^ (size_t(1) << (n - 1 - g.q1));
            m[r][c] = 1.0;
        }
        return m;
    }

    for (size_t r = 0; r < dim; ++r) m[r][r] = 1.0;  // NOP
    return m;
}

inline std::vector<Amp> dense_oracle_state(const BoundCircuit& c) {
    const size_t dim = size_t(1) << c.n_qubits;
    std::vector<Amp> state(dim, Amp(0, 0));
    state[0] = 1.0;
    for (const auto& g : c.gates) {
        auto m = dense_gate_matrix(g, c.n_qubits);
        std::vector<Amp> next(dim, Amp(0, 0));
        for (size_t r = 0; r < dim; ++r)
            for (size_t k = 0; k < dim; ++k) next[r] += m[r][k] * state[k];
        state = std::move(next);
    }
    return state;
}

}  // namespace qmt_test
