#include "ttcnet/layers.hpp"

#include <cmath>

#include "ttcnet/errors.hpp"

namespace ttcnet {

Tensor& ParamRegistry::add(const std::string& name, Tensor init) {
    if (!init.defined()) throw UsageError("ParamRegistry::add('" + name + "'): undefined tensor");
    if (find(name)) throw UsageError("ParamRegistry::add: duplicate parameter '" + name + "'");
    entries_.emplace_back(name, std::move(init));
    return entries_.back().second;
}

void ParamRegistry::watch_all(Tape& tape) {
    for (auto& [name, t] : entries_) t = tape.watch(t);
}

std::size_t ParamRegistry::scalar_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : entries_) n += t.size();
    return n;
}

Tensor* ParamRegistry::find(const std::string& name) {
    for (auto& [n, t] : entries_) {
        if (n == name) return &t;
    }
    return nullptr;
}

const Tensor* ParamRegistry::find(const std::string& name) const {
    return const_cast<ParamRegistry*>(this)->find(name);
}

Linear::Linear(ParamRegistry& reg, const std::string& name, std::size_t in, std::size_t out,
               Rng& rng, Init weight_init, double bias_init)
    : in_(in), out_(out) {
    if (in == 0 || out == 0) throw ConfigError("Linear '" + name + "': zero dimension");
    Tensor w;
    switch (weight_init) {
        case Init::Xavier: {
            const double a = std::sqrt(6.0 / static_cast<double>(in + out));
            w = Tensor::rand_uniform({in, out}, rng, -a, a);
            break;
        }
        case Init::Zero:
            w = Tensor(Shape{in, out});
            break;
    }
    w_ = &reg.add(name + ".w", std::move(w));
    b_ = &reg.add(name + ".b", Tensor::full({out}, bias_init));
}

Tensor Linear::operator()(const Tensor& x) const {
    if (!w_) throw UsageError("Linear: used before construction");
    return add_rowvec(matmul(x, *w_), *b_);
}

FeedForward::FeedForward(ParamRegistry& reg, const std::string& name, std::size_t d_in,
                         std::size_t hidden, std::size_t d_out, Rng& rng, Init out_init)
    : lin1_(reg, name + ".l1", d_in, hidden, rng, Init::Xavier),
      lin2_(reg, name + ".l2", hidden, d_out, rng, out_init) {}

Tensor FeedForward::operator()(const Tensor& x) const { return lin2_(relu(lin1_(x))); }

Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) {
        throw ConfigError("dropout: rate must be in [0, 1), got " + std::to_string(rate));
    }
    if (!training || rate == 0.0) return x;
    const double keep = 1.0 - rate;
    Tensor mask(x.shape());
    double* m = mask.data();
    for (std::size_t i = 0; i < mask.size(); ++i) {
        m[i] = (rng.uniform() < rate) ? 0.0 : 1.0 / keep;
    }
    return mul(x, mask);
}

}  // namespace ttcnet
