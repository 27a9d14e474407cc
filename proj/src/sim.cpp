#include "qmt/sim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "qmt/rng.hpp"

namespace qmt {

Statevector::Statevector(int n_qubits) : n_(n_qubits) {
    if (n_ < 1) throw PreconditionError("statevector needs at least one qubit");
    if (n_ > kMaxQubits)
        throw CapacityError("statevector limited to " + std::to_string(kMaxQubits) +
                            " qubits, got " + std::to_string(n_));
    amps_.assign(size_t(1) << n_, Amp(0.0, 0.0));
    amps_[0] = Amp(1.0, 0.0);
}

double Statevector::norm() const {
    double s = 0.0;
    for (const auto& a : amps_) s += std::norm(a);
    return std::sqrt(s);
}

void Statevector::check_qubit(int q) const {
    if (q < 0 || q >= n_) throw PreconditionError("qubit index out of range: " + std::to_string(q));
}

template <typename F>
void Statevector::for_pairs(int q, F&& f) {
    const size_t step = size_t(1) << (n_ - 1 - q);
    const size_t dim = amps_.size();
    for (size_t base = 0; base < dim; base += 2 * step)
        for (size_t i = base; i < base + step; ++i) f(amps_[i], amps_[i + step]);
}

void Statevector::rx(int q, double theta) {
    check_qubit(q);
    const double c = std::cos(theta / 2.0), s = std::sin(theta / 2.0);
    const Amp ms(0.0, -s);
    for_pairs(q, [&](Amp& a0, Amp& a1) {
        Amp t0 = c * a0 + ms * a1;
        Amp t1 = ms * a0 + c * a1;
        a0 = t0;
        a1 = t1;
    });
}

void Statevector::rz(int q, double theta) {
    check_qubit(q);
    const Amp e0 = std::polar(1.0, -theta / 2.0), e1 = std::polar(1.0, theta / 2.0);
    for_pairs(q, [&](Amp& a0, Amp& a1) {
        a0 *= e0;
        a1 *= e1;
    });
}

void Statevector::h(int q) {
    check_qubit(q);
    const double r = 1.0 / std::sqrt(2.0);
    for_pairs(q, [&](Amp& a0, Amp& a1) {
        Amp t0 = r * (a0 + a1);
        Amp t1 = r * (a0 - a1);
        a0 = t0;
        a1 = t1;
    });
}

void Statevector::crz(int control, int target, double theta) {
    check_qubit(control);
    check_qubit(target);
    if (control == target) throw PreconditionError("CRZ needs distinct qubits");
    const Amp e0 = std::polar(1.0, -theta / 2.0), e1 = std::polar(1.0, theta / 2.0);
    const size_t cmask = size_t(1) << (n_ - 1 - control);
    const size_t tmask = size_t(1) << (n_ - 1 - target);
    for (size_t i = 0; i < amps_.size(); ++i)
        if (i & cmask) amps_[i] *= (i & tmask) ? e1 : e0;
}

void Statevector::cnot(int control, int target) {
    check_qubit(control);
    check_qubit(target);
    if (control == target) throw PreconditionError("CNOT needs distinct qubits");
    const size_t cmask = size_t(1) << (n_ - 1 - control);
    const size_t tmask = size_t(1) << (n_ - 1 - target);
    for (size_t i = 0; i < amps_.size(); ++i)
        if ((i & cmask) && !(i & tmask)) std::swap(amps_[i], amps_[i | tmask]);
}

void Statevector::apply(const BoundGate& g) {
    switch (g.kind) {
        case GateKind::NOP: return;
        case GateKind::RX: rx(g.q0, g.angle); return;
        case GateKind::RZ: rz(g.q0, g.angle); return;
        case GateKind::H: h(g.q0); return;
        case GateKind::CRZ: crz(g.q0, g.q1, g.angle); return;
        case GateKind::CNOT: cnot(g.q0, g.q1); return;
    }
    throw PreconditionError("unknown gate kind");
}

double OutcomeDistribution::total() const {
    double s = 0.0;
    for (const auto& [_, p] : mass) s += p;
    return s;
}

Statevector run_statevector(const BoundCircuit& c) {
    Statevector sv(c.n_qubits);
    for (const auto& g : c.gates) sv.apply(g);
    return sv;
}

namespace {

std::string bitstring(size_t index, int n) {
    std::string s(n, '0');
    for (int q = 0; q < n; ++q)
        if (index & (size_t(1) << (n - 1 - q))) s[q] = '1';
    return s;
}

}  // namespace

OutcomeDistribution exact_distribution(const BoundCircuit& c) {
    auto sv = run_statevector(c);
    OutcomeDistribution d;
    d.n_qubits = c.n_qubits;
    d.shots = OutcomeDistribution::kExact;
    const auto& amps = sv.amps();
    // Amplitudes below the noise floor are rounding residue (e.g. cos(pi/2))
    // and would otherwise leak phantom outcomes into the distribution.
    constexpr double kNoiseFloor = 1e-18;
    for (size_t i = 0; i < amps.size(); ++i) {
        double p = std::norm(amps[i]);
        if (p > kNoiseFloor) d.mass[bitstring(i, c.n_qubits)] = p;
    }
    return d;
}

OutcomeDistribution sample(const BoundCircuit& c, long long shots, uint64_t seed) {
    if (shots < 1) throw PreconditionError("shots must be >= 1");
    auto exact = exact_distribution(c);

    std::vector<const std::string*> keys;
    std::vector<double> cdf;
    double acc = 0.0;
    for (const auto& [k, p] : exact.mass) {
        acc += p;
        keys.push_back(&k);
        cdf.push_back(acc);
    }

    OutcomeDistribution d;
    d.n_qubits = c.n_qubits;
    d.shots = shots;
    Rng rng(seed);
    std::map<std::string, long long> counts;
    for (long long s = 0; s < shots; ++s) {
        double u = rng.uniform() * acc;
        size_t at = std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
        if (at >= keys.size()) at = keys.size() - 1;
        ++counts[*keys[at]];
    }
    for (const auto& [k, n] : counts)
        d.mass[k] = static_cast<double>(n) / static_cast<double>(shots);
    return d;
}

OutcomeDistribution postselect(const OutcomeDistribution& d, const std::vector<int>& zeros) {
    for (int q : zeros)
        if (q < 0 || q >= d.n_qubits)
            throw PreconditionError("postselect qubit out of range: " + std::to_string(q));
    std::vector<char> drop(d.n_qubits, 0);
    for (int q : zeros) drop[q] = 1;

    OutcomeDistribution out;
    out.n_qubits = d.n_qubits - static_cast<int>(zeros.size());
    out.shots = d.shots;
    double kept = 0.0;
    for (const auto& [key, p] : d.mass) {
        bool ok = true;
        for (int q : zeros)
            if (key[q] != '0') { ok = false; break; }
        if (!ok) continue;
        std::string rest;
        rest.reserve(out.n_qubits);
        for (int q = 0; q < d.n_qubits; ++q)
            if (!drop[q]) rest += key[q];
        out.mass[rest] += p;
        kept += p;
    }
    if (kept <= 0.0)
        throw PreconditionError("post-selection removed all probability mass");
    for (auto& [_, p] : out.mass) p /= kept;
    return out;
}

double total_variation(const OutcomeDistribution& a, const OutcomeDistribution& b) {
    if (a.n_qubits != b.n_qubits)
        throw PreconditionError("total variation needs matching qubit counts");
    double s = 0.0;
    for (const auto& [k, p] : a.mass) {
        auto it = b.mass.find(k);
        s += std::abs(p - (it == b.mass.end() ? 0.0 : it->second));
    }
    for (const auto& [k, p] : b.mass)
        if (!a.mass.count(k)) s += p;
    return s / 2.0;
}

std::string distribution_csv(const OutcomeDistribution& d) {
    std::ostringstream out;
    out << "outcome,p\n";
    out.precision(17);
    for (const auto& [k, p] : d.mass) out << k << ',' << p << '\n';
    return out.str();
}

OutcomeDistribution distribution_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "outcome,p")
        throw IoError("distribution CSV must start with 'outcome,p'");
    OutcomeDistribution d;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos) throw IoError("bad distribution CSV row: " + line);
        std::string key = line.substr(0, comma);
        d.mass[key] = std::stod(line.substr(comma + 1));
        d.n_qubits = static_cast<int>(key.size());
    }
    return d;
}

}  // namespace qmt
