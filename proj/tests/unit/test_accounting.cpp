#include <gtest/gtest.h>

#include "sppnet/accounting.hpp"
#include "sppnet/errors.hpp"
#include "sppnet/sppnet.hpp"

using namespace sppnet;

namespace {

LayerSpec conv(int cin, int cout, int k, int out, bool bias, int groups = 1, int stride = 1) {
  LayerSpec s;
  s.kind = "conv2d";
  s.in_channels = cin;
  s.out_channels = cout;
  s.kernel = k;
  s.stride = stride;
  s.groups = groups;
  s.bias = bias;
  s.out_height = s.out_width = out;
  return s;
}

}  // namespace

// Hand-computed cases; each comment shows the arithmetic.
TEST(Accounting, ConvCases) {
  // 3*3*3*8 + 8
  EXPECT_EQ(layer_cost(conv(3, 8, 3, 16, true)).params, 224);
  // 2*9*3*8*256
  EXPECT_EQ(layer_cost(conv(3, 8, 3, 16, false)).flops, 110592);
  // 48 + 1
  EXPECT_EQ(layer_cost(conv(48, 1, 1, 64, true)).params, 49);
  // 2*1*48*1*4096, plus 4096 bias adds
  EXPECT_EQ(layer_cost(conv(48, 1, 1, 64, false)).flops, 393216);
  EXPECT_EQ(layer_cost(conv(48, 1, 1, 64, true)).flops, 393216 + 4096);
  // depthwise: 9*1*16 + 16 params; 2*9*16*1024 + 16*1024 FLOPs
  const LayerCost dw = layer_cost(conv(16, 16, 3, 32, true, 16));
  EXPECT_EQ(dw.params, 160);
  EXPECT_EQ(dw.flops, 311296);
  // 9*16*32
  EXPECT_EQ(layer_cost(conv(16, 32, 3, 8, false, 1, 2)).params, 4608);
}

TEST(Accounting, ConvTransposeCase) {
  LayerSpec s;
  s.kind = "conv_transpose2d";
  s.in_channels = 64;
  s.out_channels = 16;
  s.kernel = s.stride = 2;
  s.out_height = s.out_width = 32;
  const LayerCost c = layer_cost(s);
  EXPECT_EQ(c.params, 64 * 16 * 4 + 16);                // 4112
  EXPECT_EQ(c.flops, 2 * 64 * 16 * 4 * 256 + 16 * 1024);  // 2113536
}

TEST(Accounting, LinearAttentionMlpCases) {
  LayerSpec lin;
  lin.kind = "linear";
  lin.in_channels = 64;
  lin.out_channels = 256;
  lin.tokens = 10;
  EXPECT_EQ(layer_cost(lin).params, 16640);   // 64*256 + 256
  EXPECT_EQ(layer_cost(lin).flops, 330240);   // 2*10*64*256 + 10*256

  LayerSpec att;
  att.kind = "attention";
  att.dim = 64;
  att.heads = 4;
  att.tokens = 3;
  att.tokens_kv = 256;
  EXPECT_EQ(layer_cost(att).params, 16640);  // 4*64^2 + 4*64
  // projections 2*64^2*(2*3 + 2*256) + 64*518; products 4*3*256*64; softmax 4*4*3*256
  EXPECT_EQ(layer_cost(att).flops, 4243456 + 33152 + 196608 + 12288);

  LayerSpec mlp;
  mlp.kind = "mlp";
  mlp.dim = 64;
  mlp.hidden = 256;
  mlp.tokens = 10;
  EXPECT_EQ(layer_cost(mlp).params, 33088);               // 64*256 + 256 + 256*64 + 64
  EXPECT_EQ(layer_cost(mlp).flops, 655360 + 3200 + 2560);  // matmuls, biases, gelu
}

TEST(Accounting, ElementwiseAndTables) {
  LayerSpec ln;
  ln.kind = "layer_norm";
  ln.dim = 64;
  ln.elements = 640;
  EXPECT_EQ(layer_cost(ln).params, 128);
  EXPECT_EQ(layer_cost(ln).flops, 3200);

  LayerSpec emb;
  emb.kind = "embedding";
  emb.elements = 128;
  emb.tokens = 2;
  emb.dim = 64;
  EXPECT_EQ(layer_cost(emb).params, 128);
  EXPECT_EQ(layer_cost(emb).flops, 128);

  LayerSpec pool;
  pool.kind = "max_pool2d";
  pool.kernel = 2;
  pool.elements = 1024;
  EXPECT_EQ(layer_cost(pool).flops, 3072);

  LayerSpec act;
  act.kind = "gelu";
  act.elements = 500;
  EXPECT_EQ(layer_cost(act), (LayerCost{0, 500}));
}

TEST(Accounting, EmptyAndUnknown) {
  EXPECT_EQ(count_params(ArchitectureSpec{}), 0);
  EXPECT_EQ(estimate_flops(ArchitectureSpec{}), 0);
  LayerSpec bad;
  bad.kind = "lstm";
  LayerSpec worse;
  worse.kind = "rnn";
  try {
    estimate_flops(ArchitectureSpec{conv(1, 1, 1, 1, false), bad, worse});
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("lstm"), std::string::npos);
    EXPECT_NE(msg.find("rnn"), std::string::npos);
  }
}

TEST(Accounting, ConvFlopsScaleWithArea) {
  EXPECT_EQ(layer_cost(conv(3, 8, 3, 32, false)).flops, 4 * layer_cost(conv(3, 8, 3, 16, false)).flops);
}

TEST(Accounting, SubmoduleRowsSumToTotals) {
  const SppNet model(ModelConfig::desk());
  const ArchitectureSpec spec = model.describe();
  const auto rows = cost_by_submodule(spec);
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0].submodule, "image_encoder");
  std::int64_t p = 0, f = 0;
  for (const auto& r : rows) {
    p += r.params;
    f += r.flops;
  }
  EXPECT_EQ(p, count_params(spec));
  EXPECT_EQ(f, estimate_flops(spec));
  EXPECT_EQ(count_params(model), model.parameters().scalar_count());
  EXPECT_EQ(estimate_flops(model), estimate_flops(model.describe()));
}

TEST(Accounting, BlockSwapChangesOnlyBlockRow) {
  ModelConfig a = ModelConfig::desk();
  ModelConfig b = a;
  b.block_kind = BlockKind::kStem;
  const auto ra = cost_by_submodule(SppNet(a).describe());
  const auto rb = cost_by_submodule(SppNet(b).describe());
  ASSERT_EQ(ra.size(), rb.size());
  for (std::size_t i = 0; i < ra.size(); ++i) {
    if (ra[i].submodule == "block") {
      EXPECT_LT(ra[i].params, rb[i].params);
    } else {
      EXPECT_EQ(ra[i].params, rb[i].params) << ra[i].submodule;
      EXPECT_EQ(ra[i].flops, rb[i].flops) << ra[i].submodule;
    }
  }
}
