#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "triad/gradcheck.hpp"
#include "triad/rng.hpp"
#include "triad/tensor.hpp"

namespace triad {
namespace {

using DTensor = TensorT<double>;
using DTape = TapeT<double>;

DTensor random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  DTensor t = DTensor::zeros(std::move(s));
  for (auto& v : t.vec()) v = lo + (hi - lo) * rng.next_unit();
  return t;
}

// Checks reverse-mode gradients of `fwd` against central differences for
// every requires-grad parameter.
void expect_matches_finite_diff(const std::function<DTensor()>& fwd,
                                std::vector<DTensor> params, double tol = 1e-4,
                                double eps = 1e-5) {
  for (auto& p : params) {
    p.set_requires_grad();
    p.impl()->grad.clear();
  }
  {
    DTape tape;
    DTensor loss = fwd();
    tape.backward(loss);
  }
  for (auto& p : params) {
    std::vector<double> fd = finite_diff_gradient([&] { return fwd().item(); }, p, eps);
    for (std::size_t i = 0; i < fd.size(); ++i) {
      double analytic = p.has_grad() ? p.grad()[i] : 0.0;
      double err = relative_error(analytic, fd[i]);
      EXPECT_LT(err, tol) << "coordinate " << i << ": autodiff " << analytic << " vs fd "
                          << fd[i];
      if (err >= tol) return;
    }
  }
}

// Scalar loss wrapper: weighted sum with fixed random weights so every
// output coordinate influences the loss.
DTensor weighted_sum(const DTensor& out, const DTensor& weights) {
  return sum_all(mul(out, weights));
}

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  Tensor id = Tensor::from_vector({2, 2}, {1, 0, 0, 1});
  Tensor m = Tensor::from_vector({2, 2}, {3.5f, -2, 7, 0.25f});
  Tensor out = matmul(id, m);
  for (int i = 0; i < 4; ++i) EXPECT_FLOAT_EQ(out.at(i), m.at(i));
}

TEST(Matmul, HandComputedProduct) {
  Tensor a = Tensor::from_vector({2, 2}, {1, 2, 3, 4});
  Tensor b = Tensor::from_vector({2, 1}, {5, 6});
  Tensor out = matmul(a, b);
  EXPECT_FLOAT_EQ(out.at(0, 0), 17.0f);
  EXPECT_FLOAT_EQ(out.at(1, 0), 39.0f);
}

TEST(Matmul, ZeroTimesAnythingIsZero) {
  Rng rng(7);
  Tensor z = Tensor::zeros({3, 4});
  Tensor b = Tensor::randn({4, 2}, rng, 1.0);
  Tensor out = matmul(z, b);
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out.at(static_cast<int>(i)), 0.0f);
}

TEST(Matmul, MismatchNamesBothShapes) {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({4, 2});
  try {
    matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos);
    EXPECT_NE(msg.find("[4x2]"), std::string::npos);
  }
}

TEST(Softmax, ZeroRowIsUniform) {
  Tensor x = Tensor::zeros({1, 4});
  Tensor y = softmax_rows(x);
  for (int j = 0; j < 4; ++j) EXPECT_NEAR(y.at(0, j), 0.25f, 1e-7f);
}

TEST(Softmax, LargeEqualLogitsDoNotOverflow) {
  Tensor x = Tensor::from_vector({1, 2}, {1000.0f, 1000.0f});
  Tensor y = softmax_rows(x);
  EXPECT_FLOAT_EQ(y.at(0, 0), 0.5f);
  EXPECT_FLOAT_EQ(y.at(0, 1), 0.5f);
}

TEST(Softmax, ClosedFormQuarterThreeQuarters) {
  Tensor x = Tensor::from_vector({1, 2}, {0.0f, std::log(3.0f)});
  Tensor y = softmax_rows(x);
  EXPECT_NEAR(y.at(0, 0), 0.25f, 1e-6f);
  EXPECT_NEAR(y.at(0, 1), 0.75f, 1e-6f);
}

TEST(Softmax, NanInputThrows) {
  Tensor x = Tensor::from_vector({1, 2}, {std::numeric_limits<float>::quiet_NaN(), 0.0f});
  EXPECT_THROW(softmax_rows(x), NumericError);
}

TEST(Softmax, RowsSumToOneOnRandomInput) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = Tensor::randn({5, 7}, rng, 3.0);
    Tensor y = softmax_rows(x);
    for (int i = 0; i < 5; ++i) {
      float sum = 0;
      for (int j = 0; j < 7; ++j) {
        EXPECT_GE(y.at(i, j), 0.0f);
        EXPECT_LE(y.at(i, j), 1.0f);
        sum += y.at(i, j);
      }
      EXPECT_NEAR(sum, 1.0f, 1e-6f);
    }
  }
}

TEST(LayerNorm, ConstantRowMapsToZeros) {
  Tensor x = Tensor::full({1, 4}, 3.7f);
  Tensor gain = Tensor::full({4}, 1.0f);
  Tensor bias = Tensor::zeros({4});
  Tensor y = layer_norm_rows(x, gain, bias, 1e-5f);
  for (int j = 0; j < 4; ++j) EXPECT_NEAR(y.at(0, j), 0.0f, 1e-5f);
}

TEST(LayerNorm, UnitVarianceRowIsFixedPoint) {
  DTensor x = DTensor::from_vector({1, 2}, {1.0, -1.0});
  DTensor gain = DTensor::full({2}, 1.0);
  DTensor bias = DTensor::zeros({2});
  DTensor y = layer_norm_rows(x, gain, bias, 1e-14);
  EXPECT_NEAR(y.at(0, 0), 1.0, 1e-6);
  EXPECT_NEAR(y.at(0, 1), -1.0, 1e-6);
}

TEST(LayerNorm, ZeroGainBroadcastsBias) {
  Rng rng(3);
  Tensor x = Tensor::randn({2, 5}, rng, 2.0);
  Tensor gain = Tensor::zeros({5});
  Tensor bias = Tensor::from_vector({5}, {1, 2, 3, 4, 5});
  Tensor y = layer_norm_rows(x, gain, bias, 1e-5f);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 5; ++j) EXPECT_FLOAT_EQ(y.at(i, j), bias.at(j));
}

TEST(LayerNorm, StandardizesRandomRows) {
  Rng rng(5);
  Tensor x = Tensor::randn({6, 16}, rng, 4.0);
  Tensor gain = Tensor::full({16}, 1.0f);
  Tensor bias = Tensor::zeros({16});
  Tensor y = layer_norm_rows(x, gain, bias, 1e-6f);
  for (int i = 0; i < 6; ++i) {
    double mean = 0, var = 0;
    for (int j = 0; j < 16; ++j) mean += y.at(i, j);
    mean /= 16;
    for (int j = 0; j < 16; ++j) var += (y.at(i, j) - mean) * (y.at(i, j) - mean);
    var /= 16;
    EXPECT_LT(std::abs(mean), 1e-5);
    EXPECT_NEAR(var, 1.0, 1e-3);
  }
}

TEST(Maxpool, SingleElementPassesThrough) {
  Tensor v = Tensor::from_vector({3}, {1, -2, 3});
  Tensor out = maxpool_set<float>({v});
  for (int i = 0; i < 3; ++i) EXPECT_FLOAT_EQ(out.at(i), v.at(i));
}

TEST(Maxpool, DuplicateInputsAreIdempotent) {
  Tensor v = Tensor::from_vector({3}, {1, -2, 3});
  Tensor out = maxpool_set<float>({v, v});
  for (int i = 0; i < 3; ++i) EXPECT_FLOAT_EQ(out.at(i), v.at(i));
}

TEST(Maxpool, ElementwiseMaximum) {
  Tensor a = Tensor::from_vector({2}, {1, 5});
  Tensor b = Tensor::from_vector({2}, {3, 2});
  Tensor out = maxpool_set<float>({a, b});
  EXPECT_FLOAT_EQ(out.at(0), 3.0f);
  EXPECT_FLOAT_EQ(out.at(1), 5.0f);
}

TEST(Maxpool, EmptyListThrows) {
  EXPECT_THROW(maxpool_set<float>({}), ContractError);
}

TEST(Maxpool, PermutationInvariantExactly) {
  Rng rng(17);
  std::vector<Tensor> xs;
  for (int m = 0; m < 4; ++m) xs.push_back(Tensor::randn({6}, rng, 2.0));
  Tensor a = maxpool_set(xs);
  std::vector<Tensor> perm = {xs[2], xs[0], xs[3], xs[1]};
  Tensor b = maxpool_set(perm);
  for (int i = 0; i < 6; ++i) EXPECT_EQ(a.at(i), b.at(i));
}

TEST(Maxpool, TieGradientGoesToFirstInput) {
  DTensor a = DTensor::from_vector({2}, {1.0, 2.0});
  DTensor b = a.clone();
  a.set_requires_grad();
  b.set_requires_grad();
  DTape tape;
  DTensor loss = sum_all(maxpool_set<double>({a, b}));
  tape.backward(loss);
  EXPECT_EQ(a.grad()[0], 1.0);
  EXPECT_EQ(a.grad()[1], 1.0);
  EXPECT_FALSE(b.has_grad());
}

TEST(Attention, SingleTokenReturnsItsValue) {
  Rng rng(23);
  Tensor q = Tensor::randn({1, 4}, rng, 1.0);
  Tensor kv = Tensor::randn({1, 4}, rng, 1.0);
  for (int heads : {1, 2, 4}) {
    Tensor out = masked_attention(q, kv, AttnMask::all(1, 1), heads);
    for (int j = 0; j < 4; ++j) EXPECT_EQ(out.at(0, j), kv.at(0, j));
  }
}

TEST(Attention, IdentityMaskAttendsOnlyToSelf) {
  Rng rng(29);
  Tensor q = Tensor::randn({3, 4}, rng, 1.0);
  Tensor kv = Tensor::randn({3, 4}, rng, 1.0);
  Tensor out = masked_attention(q, kv, AttnMask::identity(3), 2);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) EXPECT_EQ(out.at(i, j), kv.at(i, j));
}

TEST(Attention, CausalTwoTokenHandOracle) {
  DTensor q = DTensor::from_vector({2, 2}, {0.3, -0.7, 1.1, 0.4});
  DTensor kv = DTensor::from_vector({2, 2}, {0.9, 0.2, -0.5, 1.3});
  DTensor out = masked_attention(q, kv, AttnMask::causal(2), 1);

  // Row 0 sees only itself.
  EXPECT_NEAR(out.at(0, 0), kv.at(0, 0), 1e-12);
  EXPECT_NEAR(out.at(0, 1), kv.at(0, 1), 1e-12);
  // Row 1: scaled dot products against both keys, then softmax blend.
  double s = 1.0 / std::sqrt(2.0);
  double l0 = (q.at(1, 0) * kv.at(0, 0) + q.at(1, 1) * kv.at(0, 1)) * s;
  double l1 = (q.at(1, 0) * kv.at(1, 0) + q.at(1, 1) * kv.at(1, 1)) * s;
  double m = std::max(l0, l1);
  double w0 = std::exp(l0 - m), w1 = std::exp(l1 - m);
  double z = w0 + w1;
  w0 /= z;
  w1 /= z;
  EXPECT_NEAR(out.at(1, 0), w0 * kv.at(0, 0) + w1 * kv.at(1, 0), 1e-12);
  EXPECT_NEAR(out.at(1, 1), w0 * kv.at(0, 1) + w1 * kv.at(1, 1), 1e-12);
}

TEST(Attention, FullyMaskedRowThrows) {
  Tensor q = Tensor::zeros({2, 2});
  Tensor kv = Tensor::zeros({2, 2});
  AttnMask mask = AttnMask::all(2, 2);
  mask.allow[2] = 0;
  mask.allow[3] = 0;
  EXPECT_THROW(masked_attention(q, kv, mask, 1), ContractError);
}

TEST(Attention, OutputIgnoresMaskedKeysAndValuesExactly) {
  Rng rng(31);
  Tensor q = Tensor::randn({3, 4}, rng, 1.0);
  Tensor kv = Tensor::randn({3, 4}, rng, 1.0);
  AttnMask mask = AttnMask::causal(3);
  Tensor base = masked_attention(q, kv, mask, 2);

  Tensor kv2 = kv.clone();
  for (int j = 0; j < 4; ++j) kv2.at(2, j) = 1e6f;  // visible only to row 2
  Tensor mod = masked_attention(q, kv2, mask, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 4; ++j) EXPECT_EQ(base.at(i, j), mod.at(i, j));
}

TEST(Backward, SumGradIsAllOnes) {
  Tensor w = Tensor::from_vector({2, 3}, {1, 2, 3, 4, 5, 6});
  w.set_requires_grad();
  Tape tape;
  Tensor loss = sum_all(w);
  tape.backward(loss);
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_FLOAT_EQ(w.grad()[i], 1.0f);
}

TEST(Backward, MatmulSumMatchesFiniteDifferences) {
  Rng rng(41);
  DTensor a = random_tensor({3, 4}, rng);
  DTensor b = random_tensor({4, 2}, rng);
  expect_matches_finite_diff([&] { return sum_all(matmul(a, b)); }, {a, b});
}

TEST(Backward, SecondCallOnSameTapeThrows) {
  Tensor w = Tensor::from_vector({1}, {2.0f});
  w.set_requires_grad();
  Tape tape;
  Tensor loss = sum_all(w);
  tape.backward(loss);
  EXPECT_THROW(tape.backward(loss), ContractError);
}

TEST(Backward, NonScalarLossThrows) {
  Tensor w = Tensor::from_vector({2}, {1.0f, 2.0f});
  w.set_requires_grad();
  Tape tape;
  Tensor doubled = scale(w, 2.0f);
  EXPECT_THROW(tape.backward(doubled), ContractError);
}

TEST(Backward, LeafGradAccumulatesAcrossTapes) {
  Tensor w = Tensor::from_vector({2}, {1.0f, 2.0f});
  w.set_requires_grad();
  for (int step = 0; step < 2; ++step) {
    Tape tape;
    Tensor loss = sum_all(w);
    tape.backward(loss);
  }
  EXPECT_FLOAT_EQ(w.grad()[0], 2.0f);
  EXPECT_FLOAT_EQ(w.grad()[1], 2.0f);
}

TEST(Backward, IntermediateFromAnotherTapeIsRejected) {
  Tensor w = Tensor::from_vector({2}, {1.0f, 2.0f});
  w.set_requires_grad();
  Tensor stale;
  {
    Tape tape;
    stale = scale(w, 2.0f);
  }
  Tape other;
  EXPECT_THROW(sum_all(stale), ContractError);
}

TEST(FiniteDiff, SquareFunctionSlope) {
  DTensor x = DTensor::scalar(3.0);
  auto f = [&] { return x.data()[0] * x.data()[0]; };
  std::vector<double> g = finite_diff_gradient(f, x, 1e-5);
  EXPECT_NEAR(g[0], 6.0, 1e-6);
}

TEST(FiniteDiff, ConstantFunctionIsFlat) {
  DTensor x = DTensor::from_vector({3}, {1.0, 2.0, 3.0});
  auto f = [&] { return 42.0; };
  std::vector<double> g = finite_diff_gradient(f, x, 1e-5);
  for (double v : g) EXPECT_EQ(v, 0.0);
}

TEST(FiniteDiff, SoftmaxCrossEntropyMatchesClosedForm) {
  DTensor z = DTensor::from_vector({3}, {0.2, -1.3, 0.7});
  int target = 1;
  auto f = [&] {
    double m = std::max({z.at(0), z.at(1), z.at(2)});
    double sum = 0;
    for (int j = 0; j < 3; ++j) sum += std::exp(z.at(j) - m);
    return -(z.at(target) - m - std::log(sum));
  };
  std::vector<double> g = finite_diff_gradient(f, z, 1e-5);
  double m = std::max({z.at(0), z.at(1), z.at(2)});
  double sum = 0;
  for (int j = 0; j < 3; ++j) sum += std::exp(z.at(j) - m);
  for (int j = 0; j < 3; ++j) {
    double p = std::exp(z.at(j) - m) / sum;
    double expected = p - (j == target ? 1.0 : 0.0);
    EXPECT_NEAR(g[j], expected, 1e-5);
  }
}

TEST(CrossEntropy, NonOneHotTargetThrows) {
  Tensor p = Tensor::full({1, 2}, 0.5f);
  Tensor y = Tensor::from_vector({1, 2}, {0.5f, 0.5f});
  EXPECT_THROW(cross_entropy_rows(p, y), ContractError);
}

TEST(CrossEntropy, AllWeightsZeroThrows) {
  Tensor p = Tensor::full({1, 2}, 0.5f);
  Tensor y = Tensor::from_vector({1, 2}, {1.0f, 0.0f});
  EXPECT_THROW(cross_entropy_rows(p, y, {0.0f}), ContractError);
}

// Reverse-mode gradients of every primitive against central differences on
// randomized small shapes (dims <= 8), one full pass per seed.
TEST(GradientSweep, AllPrimitivesMatchFiniteDifferences) {
  const int kSeeds = 100;
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(static_cast<std::uint64_t>(seed) + 1000);
    int r = rng.next_int(1, 8);
    int c = rng.next_int(2, 8);
    int k = rng.next_int(1, 8);

    {
      DTensor a = random_tensor({r, c}, rng), b = random_tensor({r, c}, rng);
      DTensor w = random_tensor({r, c}, rng);
      expect_matches_finite_diff([&] { return weighted_sum(add(a, b), w); }, {a, b});
      expect_matches_finite_diff([&] { return weighted_sum(sub(a, b), w); }, {a, b});
      expect_matches_finite_diff([&] { return weighted_sum(mul(a, b), w); }, {a, b});
      expect_matches_finite_diff([&] { return weighted_sum(scale(a, 1.7), w); }, {a});
      DTensor wt = random_tensor({c, r}, rng);
      expect_matches_finite_diff([&] { return weighted_sum(transpose2d(a), wt); }, {a});
    }
    {
      DTensor a = random_tensor({r, c}, rng);
      DTensor v = random_tensor({c}, rng);
      DTensor w = random_tensor({r, c}, rng);
      expect_matches_finite_diff([&] { return weighted_sum(add_rowvec(a, v), w); }, {a, v});
    }
    {
      // Keep inputs away from the relu kink so central differences see a
      // locally linear function.
      DTensor a = random_tensor({r, c}, rng);
      for (auto& x : a.vec()) x += (x >= 0 ? 0.1 : -0.1);
      DTensor w = random_tensor({r, c}, rng);
      expect_matches_finite_diff([&] { return weighted_sum(relu(a), w); }, {a});
    }
    {
      DTensor a = random_tensor({r, k}, rng), b = random_tensor({k, c}, rng);
      DTensor w = random_tensor({r, c}, rng);
      expect_matches_finite_diff([&] { return weighted_sum(matmul(a, b), w); }, {a, b});
      DTensor bt = random_tensor({c, k}, rng);
      expect_matches_finite_diff([&] { return weighted_sum(matmul_nt(a, bt), w); }, {a, bt});
    }
    {
      DTensor x = random_tensor({r, c}, rng, -3.0, 3.0);
      DTensor w = random_tensor({r, c}, rng);
      expect_matches_finite_diff([&] { return weighted_sum(softmax_rows(x), w); }, {x});

      AttnMask mask{r, c, std::vector<std::uint8_t>(static_cast<std::size_t>(r) * c, 0)};
      for (int i = 0; i < r; ++i) {
        mask.allow[static_cast<std::size_t>(i) * c + rng.next_int(0, c)] = 1;
        for (int j = 0; j < c; ++j)
          if (rng.next_bernoulli(0.5)) mask.allow[static_cast<std::size_t>(i) * c + j] = 1;
      }
      expect_matches_finite_diff([&] { return weighted_sum(masked_softmax_rows(x, mask), w); },
                                 {x});
    }
    {
      DTensor x = random_tensor({r, std::max(c, 2)}, rng, -2.0, 2.0);
      int width = x.dim(1);
      DTensor gain = random_tensor({width}, rng, 0.5, 1.5);
      DTensor bias = random_tensor({width}, rng);
      DTensor w = random_tensor({r, width}, rng);
      expect_matches_finite_diff(
          [&] { return weighted_sum(layer_norm_rows(x, gain, bias, 1e-5), w); }, {x, gain, bias});
    }
    {
      std::vector<DTensor> xs;
      int m = rng.next_int(1, 5);
      for (int i = 0; i < m; ++i) xs.push_back(random_tensor({c}, rng, -2.0, 2.0));
      DTensor w = random_tensor({c}, rng);
      expect_matches_finite_diff([&] { return weighted_sum(maxpool_set(xs), w); }, xs);
    }
    {
      DTensor a = random_tensor({r, c}, rng), b = random_tensor({k, c}, rng);
      DTensor w = random_tensor({r + k, c}, rng);
      expect_matches_finite_diff([&] { return weighted_sum(concat_rows<double>({a, b}), w); },
                                 {a, b});
      DTensor w2 = random_tensor({r, 2 * c}, rng);
      DTensor b2 = random_tensor({r, c}, rng);
      expect_matches_finite_diff([&] { return weighted_sum(concat_cols<double>({a, b2}), w2); },
                                 {a, b2});
    }
    {
      DTensor a = random_tensor({r + 2, c}, rng);
      DTensor w = random_tensor({2, c}, rng);
      expect_matches_finite_diff([&] { return weighted_sum(slice_rows(a, 1, 3), w); }, {a});
      DTensor wc = random_tensor({r + 2, 1}, rng);
      expect_matches_finite_diff([&] { return weighted_sum(slice_cols(a, c - 1, c), wc); }, {a});
    }
    {
      DTensor table = random_tensor({k + 1, c}, rng);
      std::vector<int> ids;
      for (int i = 0; i < r; ++i) ids.push_back(rng.next_int(0, k + 1));
      DTensor w = random_tensor({r, c}, rng);
      expect_matches_finite_diff([&] { return weighted_sum(gather_rows(table, ids), w); },
                                 {table});
    }
    {
      DTensor x = random_tensor({r, c}, rng);
      std::vector<long> index;
      for (int i = 0; i < 6; ++i)
        index.push_back(rng.next_bernoulli(0.2) ? -1 : rng.next_int(0, r * c));
      DTensor w = random_tensor({6}, rng);
      expect_matches_finite_diff([&] { return weighted_sum(gather(x, index, {6}), w); }, {x});
    }
    {
      DTensor p = random_tensor({r, c}, rng, 0.05, 1.0);
      DTensor y = DTensor::zeros({r, c});
      std::vector<double> weights;
      for (int i = 0; i < r; ++i) {
        y.at(i, rng.next_int(0, c)) = 1.0;
        weights.push_back(rng.next_bernoulli(0.8) ? 1.0 : 0.0);
      }
      if (std::accumulate(weights.begin(), weights.end(), 0.0) == 0.0) weights[0] = 1.0;
      expect_matches_finite_diff([&] { return cross_entropy_rows(p, y, weights); }, {p});
    }
    {
      int heads = (c % 2 == 0) ? 2 : 1;
      int L = rng.next_int(1, 6);
      DTensor q = random_tensor({L, c}, rng);
      DTensor kk = random_tensor({L, c}, rng);
      DTensor v = random_tensor({L, c}, rng);
      DTensor w = random_tensor({L, c}, rng);
      AttnMask mask = AttnMask::causal(L);
      expect_matches_finite_diff(
          [&] { return weighted_sum(multi_head_attention(q, kk, v, mask, heads), w); },
          {q, kk, v});
    }
  }
}

TEST(Gather, IndexBeyondSourceThrows) {
  Tensor x = Tensor::zeros({2, 2});
  EXPECT_THROW(gather(x, {0, 4}, {2}), ShapeError);
}

TEST(GatherRows, OutOfRangeIdThrows) {
  Tensor t = Tensor::zeros({3, 2});
  EXPECT_THROW(gather_rows(t, {0, 3}), VocabError);
}

}  // namespace
}  // namespace triad
