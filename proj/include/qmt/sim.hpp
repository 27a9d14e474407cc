#pragma once

#include <complex>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "qmt/circuit.hpp"

namespace qmt {

using Amp = std::complex<double>;

/// Dense statevector simulator. Qubit 0 is the most significant bit of the
/// outcome label, so basis index i has qubit q in state (i >> (n-1-q)) & 1.
class Statevector {
  public:
    static constexpr int kMaxQubits = 20;

    explicit Statevector(int n_qubits);  // |0...0>

    int n_qubits() const { return n_; }
    const std::vector<Amp>& amps() const { return amps_; }
    double norm() const;

    void apply(const BoundGate& g);

    void rx(int q, double theta);    // exp(-i theta X / 2)
    void rz(int q, double theta);    // exp(-i theta Z / 2)
    void h(int q);
    void crz(int control, int target, double theta);
    void cnot(int control, int target);

  private:
    void check_qubit(int q) const;
    template <typename F>
    void for_pairs(int q, F&& f);  // amplitude pairs differing in qubit q

    int n_;
    std::vector<Amp> amps_;
};

/// Exact outcome distribution. Bitstring keys are MSB-first per the qubit
/// convention; zero-mass outcomes are omitted. shots == kExact marks an
/// analytically exact distribution.
struct OutcomeDistribution {
    static constexpr long long kExact = -1;

    int n_qubits = 0;
    std::map<std::string, double> mass;
    long long shots = kExact;

    double total() const;
};

/// Run all gates of a bound circuit (no post-selection applied).
Statevector run_statevector(const BoundCircuit& c);

/// Squared amplitudes of the final state, un-post-selected.
OutcomeDistribution exact_distribution(const BoundCircuit& c);

/// Sample `shots` outcomes from the exact distribution (seeded inverse-CDF).
OutcomeDistribution sample(const BoundCircuit& c, long long shots, uint64_t seed);

/// Condition on |0> at the given qubits, marginalize them away and
/// renormalize. Throws PreconditionError when the surviving mass is zero.
OutcomeDistribution postselect(const OutcomeDistribution& d, const std::vector<int>& zeros);

/// Half the L1 distance between two distributions over the same qubits.
double total_variation(const OutcomeDistribution& a, const OutcomeDistribution& b);

/// CSV with header "outcome,p", rows sorted by bitstring, 17 significant
/// digits.
std::string distribution_csv(const OutcomeDistribution& d);
OutcomeDistribution distribution_from_csv(const std::string& text);

}  // namespace qmt
