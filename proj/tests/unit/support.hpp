#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "xaiopt/attribution.hpp"
#include "xaiopt/model.hpp"
#include "xaiopt/rng.hpp"
#include "xaiopt/textdata.hpp"

namespace xaiopt::testing {

inline PairInstance pair_of(const std::string& post, const std::string& claim, const std::string& id = "p") {
    PairInstance p;
    p.id = id;
    p.post = tokenize(post);
    p.claim = tokenize(claim);
    p.post_gold.bits.assign(p.post.size(), 0);
    p.claim_gold.bits.assign(p.claim.size(), 0);
    return p;
}

/// Space-separated words a0 a1 ... of the given length.
inline std::string words(std::size_t n, const std::string& stem = "w") {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += (i ? " " : "") + stem + std::to_string(i);
    return s;
}

/// sim(S) = sum of per-token values of the tokens present on both sides.
class AdditiveModel final : public SimilarityModel {
public:
    AdditiveModel(std::vector<double> post, std::vector<double> claim)
        : post_(std::move(post)), claim_(std::move(claim)) {}

    ModelCapabilities capabilities() const override { return {}; }

    double value(const std::vector<std::uint8_t>& post_off, const std::vector<std::uint8_t>& claim_off) const {
        double s = 0.0;
        for (std::size_t i = 0; i < post_.size(); ++i) {
            if (post_off.empty() || !post_off[i]) s += post_[i];
        }
        for (std::size_t i = 0; i < claim_.size(); ++i) {
            if (claim_off.empty() || !claim_off[i]) s += claim_[i];
        }
        return s;
    }

    mutable std::size_t calls = 0;

protected:
    std::vector<double> score_batch(const TokenizedText&, const TokenizedText&,
                                    std::span<const Ablation> ablations) const override {
        ++calls;
        std::vector<double> out;
        for (const auto& a : ablations) out.push_back(value(a.post, a.claim));
        return out;
    }

private:
    std::vector<double> post_;
    std::vector<double> claim_;
};

/// sim = w . mean(post rows) + w . mean(claim rows) over fixed seeded embeddings.
class LinearModel final : public GradientModel {
public:
    LinearModel(std::size_t dim, std::uint64_t seed) : dim_(dim), w_(dim) {
        Rng rng(seed);
        for (std::size_t d = 0; d < dim; ++d) w_[static_cast<Eigen::Index>(d)] = rng.normal();
        seed_ = seed;
    }

    ModelCapabilities capabilities() const override { return {true, false, MaskStrategy::zero_embedding, dim_}; }

    Matrix table(std::size_t rows, std::uint64_t salt) const {
        Rng rng(seed_ * 31 + salt);
        Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim_));
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rng.normal();
        return m;
    }

    EmbeddedPair embed(const PairInstance& pair) const override {
        return {table(pair.post.size(), 1), table(pair.claim.size(), 2)};
    }

    EmbeddedPair mask_baseline(const PairInstance& pair) const override {
        return baseline_is_input ? embed(pair) : GradientModel::mask_baseline(pair);
    }

    bool baseline_is_input = false;

    double similarity_at(const EmbeddedPair& x) const override {
        return (x.post.colwise().mean() * w_)(0) + (x.claim.colwise().mean() * w_)(0);
    }

    PairGradients gradients_at(const EmbeddedPair& x, GradientMode) const override {
        PairGradients g;
        g.similarity = similarity_at(x);
        g.post = Matrix(x.post.rows(), x.post.cols());
        g.claim = Matrix(x.claim.rows(), x.claim.cols());
        for (Eigen::Index r = 0; r < x.post.rows(); ++r) g.post.row(r) = w_.transpose() / double(x.post.rows());
        for (Eigen::Index r = 0; r < x.claim.rows(); ++r) g.claim.row(r) = w_.transpose() / double(x.claim.rows());
        return g;
    }

    /// Closed-form w . x_i / n for one side.
    std::vector<double> closed_form(const Matrix& x) const {
        std::vector<double> out;
        for (Eigen::Index r = 0; r < x.rows(); ++r) out.push_back(x.row(r).dot(w_) / double(x.rows()));
        return out;
    }

    const Vector& weights() const { return w_; }

protected:
    std::vector<double> score_batch(const TokenizedText& post, const TokenizedText& claim,
                                    std::span<const Ablation> ablations) const override {
        PairInstance p;
        p.post = post;
        p.claim = claim;
        std::vector<double> out;
        for (const auto& a : ablations) {
            auto x = embed(p);
            for (std::size_t i = 0; i < a.post.size(); ++i)
                if (a.post[i]) x.post.row(static_cast<Eigen::Index>(i)).setZero();
            for (std::size_t i = 0; i < a.claim.size(); ++i)
                if (a.claim[i]) x.claim.row(static_cast<Eigen::Index>(i)).setZero();
            out.push_back(similarity_at(x));
        }
        return out;
    }

private:
    std::size_t dim_;
    Vector w_;
    std::uint64_t seed_ = 0;
};

/// Brute-force Shapley values by averaging marginal contributions over all orderings.
inline std::vector<double> permutation_shapley(std::size_t m, const CoalitionGame& game) {
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> phi(m, 0.0);
    double count = 0.0;
    do {
        std::vector<std::uint8_t> present(m, 0);
        double prev = game({present}).front();
        for (auto i : order) {
            present[i] = 1;
            const double cur = game({present}).front();
            phi[i] += cur - prev;
            prev = cur;
        }
        count += 1.0;
    } while (std::next_permutation(order.begin(), order.end()));
    for (auto& v : phi) v /= count;
    return phi;
}

inline std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("xaiopt-test-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    f << text;
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

} // namespace xaiopt::testing
