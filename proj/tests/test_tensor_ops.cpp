#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "oracles.hpp"
#include "plcnn/graph/tape.hpp"
#include "plcnn/tensor/batchnorm.hpp"
#include "plcnn/tensor/concat.hpp"
#include "plcnn/tensor/conv.hpp"
#include "plcnn/tensor/elementwise.hpp"
#include "plcnn/tensor/linear.hpp"
#include "plcnn/tensor/pool.hpp"

using namespace plcnn;
using oracle::gradients_agree;
using oracle::random_tensor;

namespace {

using DTensor = BasicTensor<double>;

std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> d(-1, 1);
    std::vector<double> v(n);
    for (double& x : v) x = d(rng);
    return v;
}

} // namespace

TEST(Tensor, DataLengthMatchesDims) {
    Tensor t({2, 3, 4, 5});
    EXPECT_EQ(t.size(), 120u);
    EXPECT_FALSE(t.has_grad());
    EXPECT_EQ(t.ensure_grad().size(), t.size());
    EXPECT_THROW(Tensor({2, 2, 2, 2}, std::vector<float>(15)), ConfigError);
    EXPECT_THROW(Tensor({0, 1, 1, 1}), ConfigError);
}

// --- conv2d -----------------------------------------------------------------

TEST(Conv2d, IdentityPointwiseKernel) {
    ConvParams p{Tensor({1, 1, 1, 1}, 1.0f), {0.0f}, 1, 0};
    Tensor x({1, 1, 3, 3}, 1.0f);
    EXPECT_EQ(conv2d_forward(x, p), x);
}

TEST(Conv2d, SummationKernel) {
    ConvParams p{Tensor({1, 1, 3, 3}, 1.0f), {0.0f}, 1, 0};
    const Tensor y = conv2d_forward(Tensor({1, 1, 3, 3}, 1.0f), p);
    ASSERT_EQ(y.dims(), (Dims{1, 1, 1, 1}));
    EXPECT_FLOAT_EQ(y[0], 9.0f);
}

TEST(Conv2d, MatchesNaiveLoopStridedPadded) {
    std::mt19937_64 rng(11);
    const Tensor x = random_tensor<float>({2, 3, 8, 8}, rng);
    ConvParams p{random_tensor<float>({4, 3, 3, 3}, rng), {0.1f, -0.2f, 0.3f, 0.0f}, 2, 1};
    const Tensor y = conv2d_forward(x, p);
    const Tensor ref = oracle::naive_conv(x, p.weight, p.bias, 2, 1);
    ASSERT_EQ(y.dims(), ref.dims());
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-5);
}

TEST(Conv2d, MatchesNaiveLoopAcrossShapes) {
    std::mt19937_64 rng(3);
    for (std::size_t k : {1u, 3u})
        for (std::size_t stride : {1u, 2u})
            for (std::size_t pad : {0u, 1u}) {
                const Tensor x = random_tensor<float>({2, 4, 7, 6}, rng);
                const Tensor w = random_tensor<float>({5, 4, k, k}, rng);
                const Tensor y = conv2d_forward<float>(x, w, {}, {stride, pad});
                const Tensor ref = oracle::naive_conv<float>(x, w, {}, stride, pad);
                ASSERT_EQ(y.dims(), ref.dims());
                for (std::size_t i = 0; i < y.size(); ++i) ASSERT_NEAR(y[i], ref[i], 1e-5);
            }
}

TEST(Conv2d, RejectsChannelMismatchNamingShapes) {
    ConvParams p{Tensor({2, 3, 3, 3}), {}, 1, 1};
    try {
        conv2d_forward(Tensor({1, 4, 5, 5}), p);
        FAIL();
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("(1,4,5,5)"), std::string::npos);
        EXPECT_NE(msg.find("(2,3,3,3)"), std::string::npos);
    }
}

TEST(Conv2d, RejectsNonPositiveOutputAndBadKernel) {
    EXPECT_THROW(conv2d_forward(Tensor({1, 1, 2, 2}), ConvParams{Tensor({1, 1, 3, 3}), {}, 1, 0}), ConfigError);
    EXPECT_THROW(conv2d_forward(Tensor({1, 1, 8, 8}), ConvParams{Tensor({1, 1, 5, 5}), {}, 1, 2}), ConfigError);
    EXPECT_THROW(conv2d_forward(Tensor({1, 1, 8, 8}), ConvParams{Tensor({1, 1, 3, 3}), {}, 0, 1}), ConfigError);
}

TEST(Conv2dBackward, ZeroUpstreamGivesZeroGradients) {
    std::mt19937_64 rng(1);
    const Tensor x = random_tensor<float>({1, 2, 5, 5}, rng);
    ConvParams p{random_tensor<float>({3, 2, 3, 3}, rng), {0, 0, 0}, 1, 1};
    const auto g = conv2d_backward(x, p, Tensor({1, 3, 5, 5}));
    for (float v : g.input.data()) EXPECT_EQ(v, 0.0f);
    for (float v : g.weight.data()) EXPECT_EQ(v, 0.0f);
    for (float v : g.bias) EXPECT_EQ(v, 0.0f);
}

TEST(Conv2dBackward, PointwiseIdentityScalesUpstream) {
    std::mt19937_64 rng(2);
    ConvParams p{Tensor({1, 1, 1, 1}, 2.5f), {0.0f}, 1, 0};
    const Tensor x = random_tensor<float>({1, 1, 4, 4}, rng);
    const Tensor gy = random_tensor<float>({1, 1, 4, 4}, rng);
    const auto g = conv2d_backward(x, p, gy);
    for (std::size_t i = 0; i < gy.size(); ++i) EXPECT_FLOAT_EQ(g.input[i], 2.5f * gy[i]);
}

TEST(Conv2dBackward, RejectsMismatchedUpstream) {
    ConvParams p{Tensor({3, 2, 3, 3}), {}, 1, 1};
    EXPECT_THROW(conv2d_backward(Tensor({1, 2, 5, 5}), p, Tensor({1, 3, 4, 4})), ConfigError);
}

TEST(Conv2dBackward, MatchesFiniteDifferences) {
    // Twenty random geometries up to (2,4,8,8).
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(seed);
        const std::size_t n = 1 + seed % 2, cin = 1 + seed % 4, hw = 5 + seed % 4;
        const std::size_t k = seed % 3 == 0 ? 1 : 3, stride = 1 + seed % 2, pad = k == 3 ? seed % 2 : 0;
        DTensor x = random_tensor<double>({n, cin, hw, hw}, rng);
        BasicConvParams<double> p{random_tensor<double>({2, cin, k, k}, rng), random_vector(2, rng), stride, pad};
        const DTensor y = conv2d_forward(x, p);
        const DTensor gy = random_tensor<double>(y.dims(), rng);
        const auto g = conv2d_backward(x, p, gy);
        auto loss = [&] { return oracle::weighted_sum(conv2d_forward(x, p), gy); };
        for (std::size_t i = 0; i < x.size(); ++i)
            ASSERT_TRUE(gradients_agree(g.input[i], oracle::central_difference<double>(loss, &x[i], 1e-3), 1e-2))
                << "seed " << seed << " input " << i;
        for (std::size_t i = 0; i < p.weight.size(); ++i)
            ASSERT_TRUE(
                gradients_agree(g.weight[i], oracle::central_difference<double>(loss, &p.weight[i], 1e-3), 1e-2));
        for (std::size_t i = 0; i < p.bias.size(); ++i)
            ASSERT_TRUE(gradients_agree(g.bias[i], oracle::central_difference<double>(loss, &p.bias[i], 1e-3), 1e-2));
    }
}

// --- batchnorm --------------------------------------------------------------

TEST(BatchNorm, StandardizedInputPassesThrough) {
    // Per channel, the values {-1, 1} repeated have mean 0 and variance 1.
    Tensor x({2, 2, 2, 2});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = (i % 2 == 0) ? -1.0f : 1.0f;
    auto p = BatchNormParams::identity(2);
    const Tensor y = batchnorm_forward(x, p);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y[i], x[i], 1e-3);
}

TEST(BatchNorm, ZeroGammaYieldsBeta) {
    std::mt19937_64 rng(4);
    auto p = BatchNormParams::identity(3);
    p.gamma = {0, 0, 0};
    p.beta = {0.5f, -1.0f, 2.0f};
    const Tensor y = batchnorm_forward(random_tensor<float>({2, 3, 4, 4}, rng), p);
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t i = 0; i < 16; ++i) EXPECT_FLOAT_EQ(y.plane(n, c)[i], p.beta[c]);
}

TEST(BatchNorm, StatisticsMatchTwoPassOracle) {
    std::mt19937_64 rng(5);
    const Tensor x = random_tensor<float>({2, 3, 4, 4}, rng, -2.0, 5.0);
    auto p = BatchNormParams::identity(3);
    const Tensor y = batchnorm_forward(x, p);
    for (std::size_t c = 0; c < 3; ++c) {
        const auto m = oracle::channel_moments(y, c);
        EXPECT_NEAR(m.mean, 0.0, 1e-5);
        EXPECT_NEAR(m.var, 1.0, 1e-3);
        const auto src = oracle::channel_moments(x, c);
        EXPECT_NEAR(p.running_mean[c], 0.1 * src.mean, 1e-5);
        EXPECT_NEAR(p.running_var[c], 0.9 + 0.1 * src.var * 32.0 / 31.0, 1e-5);
        EXPECT_GE(p.running_var[c], 0.0f);
    }
}

TEST(BatchNorm, SingleValuePerChannelIsDegenerate) {
    auto p = BatchNormParams::identity(2);
    EXPECT_THROW(batchnorm_forward(Tensor({1, 2, 1, 1}), p), DegenerateStatisticsError);
    p.mode = Mode::Inference;
    EXPECT_NO_THROW(batchnorm_forward(Tensor({1, 2, 1, 1}), p));
}

TEST(BatchNorm, InferenceIsDeterministicAffineMap) {
    std::mt19937_64 rng(6);
    auto p = BatchNormParams::identity(3, Mode::Inference);
    p.running_mean = {0.2f, -0.1f, 0.4f};
    p.running_var = {1.5f, 0.7f, 2.0f};
    p.gamma = {1.2f, 0.8f, -0.5f};
    const Tensor x = random_tensor<float>({2, 3, 4, 4}, rng);
    const Tensor a = batchnorm_forward(x, p);
    const Tensor b = batchnorm_forward(x, p);
    EXPECT_EQ(a, b);
    EXPECT_EQ(p.running_mean, (std::vector<float>{0.2f, -0.1f, 0.4f}));
}

TEST(BatchNormBackward, ZeroUpstreamAndBetaGradient) {
    std::mt19937_64 rng(7);
    const Tensor x = random_tensor<float>({2, 3, 4, 4}, rng);
    auto p = BatchNormParams::identity(3);
    const auto z = batchnorm_backward(x, p, Tensor(x.dims()));
    for (float v : z.input.data()) EXPECT_EQ(v, 0.0f);
    for (float v : z.gamma) EXPECT_EQ(v, 0.0f);

    const Tensor gy = random_tensor<float>(x.dims(), rng);
    const auto g = batchnorm_backward(x, p, gy);
    for (std::size_t c = 0; c < 3; ++c) {
        double sum = 0;
        for (std::size_t n = 0; n < 2; ++n)
            for (std::size_t i = 0; i < 16; ++i) sum += gy.plane(n, c)[i];
        EXPECT_NEAR(g.beta[c], sum, 1e-5);
    }
}

TEST(BatchNormBackward, MatchesFiniteDifferencesBothModes) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(100 + seed);
        const std::size_t c = 1 + seed % 4;
        DTensor x = random_tensor<double>({1 + seed % 2, c, 3 + seed % 6, 3 + seed % 6}, rng, -2, 2);
        auto p = BasicBatchNormParams<double>::identity(c, seed % 2 ? Mode::Inference : Mode::Training);
        p.gamma = random_vector(c, rng);
        p.beta = random_vector(c, rng);
        for (double& v : p.running_var) v = 0.5 + std::abs(v);
        const DTensor gy = random_tensor<double>(x.dims(), rng);
        const auto g = batchnorm_backward(x, p, gy);
        auto loss = [&] {
            auto q = p;  // running statistics must not leak between evaluations
            return oracle::weighted_sum(batchnorm_forward(x, q), gy);
        };
        for (std::size_t i = 0; i < x.size(); ++i)
            ASSERT_TRUE(gradients_agree(g.input[i], oracle::central_difference<double>(loss, &x[i], 1e-3), 1e-2))
                << "seed " << seed;
        for (std::size_t i = 0; i < c; ++i) {
            ASSERT_TRUE(gradients_agree(g.gamma[i], oracle::central_difference<double>(loss, &p.gamma[i], 1e-3), 1e-2));
            ASSERT_TRUE(gradients_agree(g.beta[i], oracle::central_difference<double>(loss, &p.beta[i], 1e-3), 1e-2));
        }
    }
}

// --- relu -------------------------------------------------------------------

TEST(Relu, Examples) {
    const Tensor y = relu(Tensor({1, 1, 1, 3}, {-1.0f, 0.0f, 2.0f}));
    EXPECT_EQ(y.values(), (std::vector<float>{0, 0, 2}));
    const Tensor neg({1, 2, 2, 2}, -3.0f);
    const Tensor out = relu(neg);
    const Tensor grad = relu_backward(neg, Tensor(neg.dims(), 1.0f));
    for (float v : out.data()) EXPECT_EQ(v, 0.0f);
    for (float v : grad.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Relu, MatchesFiniteDifferencesAwayFromKink) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(seed);
        DTensor x = random_tensor<double>({2, 3, 4, 4}, rng);
        const DTensor gy = random_tensor<double>(x.dims(), rng);
        const DTensor g = relu_backward(x, gy);
        auto loss = [&] { return oracle::weighted_sum(relu(x), gy); };
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (std::abs(x[i]) < 1e-4) continue;
            ASSERT_NEAR(g[i], oracle::central_difference<double>(loss, &x[i], 1e-5), 1e-3);
        }
    }
}

// --- maxpool ----------------------------------------------------------------

TEST(MaxPool, PicksLargestWithIndex) {
    const auto r = maxpool2(Tensor({1, 1, 2, 2}, {1, 2, 3, 4}));
    EXPECT_EQ(r.output[0], 4.0f);
    EXPECT_EQ(r.argmax[0], 3u);
}

TEST(MaxPool, TieGoesToFirstIndex) {
    const Tensor x({1, 1, 2, 2}, 7.0f);
    const auto r = maxpool2(x);
    EXPECT_EQ(r.output[0], 7.0f);
    const Tensor g = maxpool2_backward(x.dims(), r.argmax, Tensor({1, 1, 1, 1}, 1.5f));
    EXPECT_EQ(g.values(), (std::vector<float>{1.5f, 0, 0, 0}));
}

TEST(MaxPool, MatchesWindowOracleExactly) {
    std::mt19937_64 rng(8);
    const Tensor x = random_tensor<float>({1, 2, 6, 6}, rng);
    EXPECT_EQ(maxpool2(x).output, oracle::window_max(x));
}

TEST(MaxPool, OddSizeIsRejected) {
    EXPECT_THROW(maxpool2(Tensor({1, 1, 3, 4})), ConfigError);
}

TEST(MaxPool, BackwardConservesGradientMass) {
    std::mt19937_64 rng(9);
    const Tensor x = random_tensor<float>({2, 3, 8, 8}, rng);
    const auto r = maxpool2(x);
    const Tensor gy = random_tensor<float>(r.output.dims(), rng);
    const Tensor gx = maxpool2_backward(x.dims(), r.argmax, gy);
    double a = 0, b = 0;
    for (float v : gx.data()) a += v;
    for (float v : gy.data()) b += v;
    EXPECT_NEAR(a, b, 1e-5);
}

// --- concat -----------------------------------------------------------------

TEST(Concat, SingleInputIsIdentity) {
    std::mt19937_64 rng(10);
    const Tensor x = random_tensor<float>({2, 3, 2, 2}, rng);
    EXPECT_EQ(concat_channels(std::vector<Tensor>{x}), x);
}

TEST(Concat, FirstInputOccupiesLeadingChannels) {
    const Tensor a({1, 2, 2, 2}, 1.0f), b({1, 2, 2, 2}, 2.0f);
    const Tensor y = concat_channels(std::vector<Tensor>{a, b});
    ASSERT_EQ(y.dims(), (Dims{1, 4, 2, 2}));
    for (std::size_t c = 0; c < 4; ++c)
        for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(y.plane(0, c)[i], c < 2 ? 1.0f : 2.0f);
}

TEST(Concat, SplitThenConcatIsBitExact) {
    std::mt19937_64 rng(12);
    const Tensor x = random_tensor<float>({3, 7, 3, 5}, rng);
    const std::vector<std::size_t> widths{2, 4, 1};
    EXPECT_EQ(concat_channels(concat_backward(x, std::span<const std::size_t>(widths))), x);
}

TEST(Concat, SpatialMismatchNamesPair) {
    try {
        concat_channels(std::vector<Tensor>{Tensor({1, 1, 2, 2}), Tensor({1, 1, 4, 4})});
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("input 1"), std::string::npos);
    }
}

// --- linear -----------------------------------------------------------------

TEST(Linear, IdentityAndZeroInput) {
    Tensor eye({3, 3, 1, 1});
    for (std::size_t i = 0; i < 3; ++i) eye[i * 3 + i] = 1.0f;
    const Tensor x({1, 3, 1, 1}, {0.5f, -1.0f, 2.0f});
    const std::vector<float> zero(3, 0.0f), b{1.0f, 2.0f, 3.0f};
    EXPECT_EQ(linear_forward<float>(x, eye, zero).values(), x.values());
    EXPECT_EQ(linear_forward<float>(Tensor({1, 3, 1, 1}), eye, b).values(), b);
    EXPECT_THROW(linear_forward<float>(Tensor({1, 4, 1, 1}), eye, b), ConfigError);
}

TEST(Linear, MatchesMatVecAndFiniteDifferences) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(seed);
        DTensor x = random_tensor<double>({2, 3, 2, 2}, rng);
        DTensor w = random_tensor<double>({4, 12, 1, 1}, rng);
        std::vector<double> b = random_vector(4, rng);
        const DTensor y = linear_forward<double>(x, w, b);
        for (std::size_t n = 0; n < 2; ++n) {
            const std::vector<double> xs(x.ptr() + n * 12, x.ptr() + (n + 1) * 12);
            const auto ref = oracle::mat_vec(w.values(), 4, xs, b);
            for (std::size_t i = 0; i < 4; ++i) ASSERT_NEAR(y[n * 4 + i], ref[i], 1e-5);
        }
        const DTensor gy = random_tensor<double>(y.dims(), rng);
        const auto g = linear_backward(x, w, gy);
        auto loss = [&] { return oracle::weighted_sum(linear_forward<double>(x, w, b), gy); };
        for (std::size_t i = 0; i < x.size(); ++i)
            ASSERT_TRUE(gradients_agree(g.input[i], oracle::central_difference<double>(loss, &x[i], 1e-3), 1e-2));
        for (std::size_t i = 0; i < w.size(); ++i)
            ASSERT_TRUE(gradients_agree(g.weight[i], oracle::central_difference<double>(loss, &w[i], 1e-3), 1e-2));
        for (std::size_t i = 0; i < b.size(); ++i)
            ASSERT_TRUE(gradients_agree(g.bias[i], oracle::central_difference<double>(loss, &b[i], 1e-3), 1e-2));
    }
}

// --- add --------------------------------------------------------------------

TEST(Add, ZeroAndNegation) {
    std::mt19937_64 rng(13);
    const Tensor x = random_tensor<float>({1, 2, 3, 3}, rng);
    EXPECT_EQ(add(x, Tensor(x.dims())), x);
    Tensor neg = x;
    for (float& v : neg.data()) v = -v;
    const Tensor sum = add(x, neg);
    for (float v : sum.data()) EXPECT_EQ(v, 0.0f);
    EXPECT_THROW(add(x, Tensor({1, 2, 3, 4})), ConfigError);
}

TEST(Add, BackwardPassesUpstreamToBothOperandsBitExact) {
    std::mt19937_64 rng(14);
    Tape<float> tape;
    const NodeId a = tape.input(random_tensor<float>({1, 2, 3, 3}, rng), true);
    const NodeId b = tape.input(random_tensor<float>({1, 2, 3, 3}, rng), true);
    const NodeId s = tape.add(a, b);
    const Tensor gy = random_tensor<float>({1, 2, 3, 3}, rng);
    tape.backward(s, gy);
    EXPECT_EQ(tape.grad(a), gy);
    EXPECT_EQ(tape.grad(b), gy);
}
