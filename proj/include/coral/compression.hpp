#ifndef CORAL_COMPRESSION_HPP
#define CORAL_COMPRESSION_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace coral {

// Sparse wire representation of a compressed vector: the kept coordinates
// (strictly increasing indices) with their transmitted values.
struct CompressedMessage {
    std::vector<int> indices;
    std::vector<double> values;
    int original_dim = 0;

    Eigen::VectorXd densify() const;

    // Wire cost: one 64-bit value plus a ceil(log2(dim))-bit index per kept
    // coordinate.
    std::uint64_t bit_cost() const;
};

enum class CompressorKind { identity, rand_k, rand_k_unbiased, top_k };

CompressorKind compressor_kind_from_string(const std::string& name);
std::string to_string(CompressorKind kind);

// Stateless compression maps.  The randomized ones consume draws from the
// caller-owned stream; the deterministic ones never touch a stream.

// Keeps k distinct uniformly chosen coordinates with raw (unscaled) values.
// Contractive with c = k/d, but biased: E[C(v)] = (k/d) v.
CompressedMessage rand_k(const Eigen::Ref<const Eigen::VectorXd>& v, int k,
                         std::mt19937_64& rng);

// Same draw, kept values scaled by d/k so that E[C(v)] = v exactly.
CompressedMessage rand_k_unbiased(const Eigen::Ref<const Eigen::VectorXd>& v, int k,
                                  std::mt19937_64& rng);

// Deterministically keeps the k largest-magnitude coordinates; ties broken
// by lowest index.  Contractive with c = k/d, not unbiased.
CompressedMessage top_k(const Eigen::Ref<const Eigen::VectorXd>& v, int k);

CompressedMessage identity_message(const Eigen::Ref<const Eigen::VectorXd>& v);

// A seeded compressor owned by one agent.  Holds the kind, the sparsity
// budget k and a private RNG stream; deterministic kinds leave the stream
// untouched so mixing kinds never perturbs the joint sample path layout.
class Compressor {
public:
    Compressor(CompressorKind kind, int k, std::uint64_t seed);

    CompressedMessage compress(const Eigen::Ref<const Eigen::VectorXd>& v);

    CompressorKind kind() const { return kind_; }
    int k() const { return k_; }
    bool deterministic() const {
        return kind_ == CompressorKind::identity || kind_ == CompressorKind::top_k;
    }

private:
    CompressorKind kind_;
    int k_;
    std::mt19937_64 stream_;
};

// Monte Carlo estimates of the two moment properties for a fixed input: the
// mean of C(v) and the contraction ratio E||C(v) - v||^2 / ||v||^2.
struct MomentEstimate {
    Eigen::VectorXd mean;
    double contraction_ratio = 0.0;
};

MomentEstimate estimate_moments(CompressorKind kind, int k,
                                const Eigen::Ref<const Eigen::VectorXd>& v,
                                int trials, std::uint64_t seed);

}  // namespace coral

#endif  // CORAL_COMPRESSION_HPP
