#include "coral/compression.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "coral/rng.hpp"

namespace coral {

namespace {

int ceil_log2(int d) {
    int bits = 0;
    while ((1 << bits) < d) ++bits;
    return bits;
}

void check_k(int k, int d) {
    if (d <= 0) throw std::invalid_argument("compressor: empty input");
    if (k < 1 || k > d)
        throw std::invalid_argument("compressor: k must satisfy 1 <= k <= dim");
}

// k distinct indices, uniform over subsets, returned sorted.  Partial
// Fisher-Yates on an index array so the draw count depends only on k.
std::vector<int> sample_indices(int d, int k, std::mt19937_64& rng) {
    std::vector<int> idx(d);
    std::iota(idx.begin(), idx.end(), 0);
    for (int s = 0; s < k; ++s) {
        std::uniform_int_distribution<int> pick(s, d - 1);
        std::swap(idx[s], idx[pick(rng)]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace

Eigen::VectorXd CompressedMessage::densify() const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(original_dim);
    for (std::size_t s = 0; s < indices.size(); ++s) out[indices[s]] = values[s];
    return out;
}

std::uint64_t CompressedMessage::bit_cost() const {
    // A message that keeps every coordinate is wired densely: the indices
    // are implicit, so only the 64-bit values are paid for.
    if (static_cast<int>(indices.size()) == original_dim)
        return static_cast<std::uint64_t>(indices.size()) * 64u;
    return static_cast<std::uint64_t>(indices.size()) *
           static_cast<std::uint64_t>(ceil_log2(original_dim) + 64);
}

CompressorKind compressor_kind_from_string(const std::string& name) {
    if (name == "identity") return CompressorKind::identity;
    if (name == "rand_k") return CompressorKind::rand_k;
    if (name == "rand_k_unbiased") return CompressorKind::rand_k_unbiased;
    if (name == "top_k") return CompressorKind::top_k;
    throw std::invalid_argument("unknown compressor kind: " + name);
}

std::string to_string(CompressorKind kind) {
    switch (kind) {
        case CompressorKind::identity: return "identity";
        case CompressorKind::rand_k: return "rand_k";
        case CompressorKind::rand_k_unbiased: return "rand_k_unbiased";
        case CompressorKind::top_k: return "top_k";
    }
    throw std::logic_error("unreachable compressor kind");
}

CompressedMessage rand_k(const Eigen::Ref<const Eigen::VectorXd>& v, int k,
                         std::mt19937_64& rng) {
    const int d = static_cast<int>(v.size());
    check_k(k, d);
    CompressedMessage msg;
    msg.original_dim = d;
    msg.indices = sample_indices(d, k, rng);
    msg.values.reserve(msg.indices.size());
    for (int i : msg.indices) msg.values.push_back(v[i]);
    return msg;
}

CompressedMessage rand_k_unbiased(const Eigen::Ref<const Eigen::VectorXd>& v, int k,
                                  std::mt19937_64& rng) {
    const int d = static_cast<int>(v.size());
    CompressedMessage msg = rand_k(v, k, rng);
    const double scale = static_cast<double>(d) / static_cast<double>(k);
    for (double& x : msg.values) x *= scale;
    return msg;
}

CompressedMessage top_k(const Eigen::Ref<const Eigen::VectorXd>& v, int k) {
    const int d = static_cast<int>(v.size());
    check_k(k, d);
    std::vector<int> order(d);
    std::iota(order.begin(), order.end(), 0);
    // Sort by decreasing magnitude, then by ascending index so that ties are
    // deterministically broken towards the lowest index.
    std::stable_sort(order.begin(), order.end(), [&v](int a, int b) {
        const double ma = std::abs(v[a]), mb = std::abs(v[b]);
        if (ma != mb) return ma > mb;
        return a < b;
    });
    order.resize(k);
    std::sort(order.begin(), order.end());
    CompressedMessage msg;
    msg.original_dim = d;
    msg.indices = std::move(order);
    msg.values.reserve(msg.indices.size());
    for (int i : msg.indices) msg.values.push_back(v[i]);
    return msg;
}

CompressedMessage identity_message(const Eigen::Ref<const Eigen::VectorXd>& v) {
    const int d = static_cast<int>(v.size());
    if (d <= 0) throw std::invalid_argument("compressor: empty input");
    CompressedMessage msg;
    msg.original_dim = d;
    msg.indices.resize(d);
    std::iota(msg.indices.begin(), msg.indices.end(), 0);
    msg.values.assign(v.data(), v.data() + d);
    return msg;
}

Compressor::Compressor(CompressorKind kind, int k, std::uint64_t seed)
    : kind_(kind), k_(k), stream_(splitmix64(seed)) {
    if (k_ < 1) throw std::invalid_argument("compressor: k must be positive");
}

CompressedMessage Compressor::compress(const Eigen::Ref<const Eigen::VectorXd>& v) {
    switch (kind_) {
        case CompressorKind::identity: return identity_message(v);
        case CompressorKind::rand_k: return coral::rand_k(v, k_, stream_);
        case CompressorKind::rand_k_unbiased: return coral::rand_k_unbiased(v, k_, stream_);
        case CompressorKind::top_k: return coral::top_k(v, k_);
    }
    throw std::logic_error("unreachable compressor kind");
}

MomentEstimate estimate_moments(CompressorKind kind, int k,
                                const Eigen::Ref<const Eigen::VectorXd>& v,
                                int trials, std::uint64_t seed) {
    if (trials < 1) throw std::invalid_argument("estimate_moments: trials must be >= 1");
    const double vnorm2 = v.squaredNorm();
    if (vnorm2 == 0.0)
        throw std::invalid_argument("estimate_moments: contraction ratio undefined for v = 0");

    Compressor comp(kind, k, seed);
    // Deterministic kinds need a single evaluation; their ratio is exact.
    const int n_eval = comp.deterministic() ? 1 : trials;

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(v.size());
    double err2 = 0.0;
    for (int t = 0; t < n_eval; ++t) {
        const Eigen::VectorXd dense = comp.compress(v).densify();
        mean += dense;
        err2 += (dense - v).squaredNorm();
    }
    MomentEstimate est;
    est.mean = mean / static_cast<double>(n_eval);
    est.contraction_ratio = err2 / (static_cast<double>(n_eval) * vnorm2);
    return est;
}

}  // namespace coral
