#include "shiftsr/models.hpp"

#include <cmath>

#include "shiftsr/errors.hpp"

namespace shiftsr {

using namespace nn;

nn::Tensor Codec::encode_eval(const nn::Tensor& x) {
    Graph g(false);
    return encode(g, g.leaf(x))->value;
}

nn::Tensor Codec::decode_eval(const nn::Tensor& z) {
    Graph g(false);
    return decode(g, g.leaf(z))->value;
}

Var IdentityCodec::encode(Graph& g, const Var& x) {
    if (x->value.shape.c != channels_)
        throw ShapeError("identity codec expects " + std::to_string(channels_) + " channels, got " +
                         x->value.shape.str());
    return x;
}

Var IdentityCodec::decode(Graph& g, const Var& z) { return clamp01(g, z); }

// ---------------------------------------------------------------------------
// TinyAutoencoderCodec
// ---------------------------------------------------------------------------

TinyAutoencoderCodec::TinyAutoencoderCodec(const TinyAutoencoderConfig& cfg) : cfg_(cfg) {
    const int b = cfg.base_channels;
    enc1_ = Conv2dLayer::make(reg_, "enc1", cfg.image_channels, b, 3, 2, 1, cfg.seed);
    enc2_ = Conv2dLayer::make(reg_, "enc2", b, 2 * b, 3, 2, 1, cfg.seed);
    enc3_ = Conv2dLayer::make(reg_, "enc3", 2 * b, cfg.latent_channels, 3, 1, 1, cfg.seed);
    dec1_ = Conv2dLayer::make(reg_, "dec1", cfg.latent_channels, 2 * b, 3, 1, 1, cfg.seed);
    dec2_ = Conv2dLayer::make(reg_, "dec2", 2 * b, b, 3, 1, 1, cfg.seed);
    dec3_ = Conv2dLayer::make(reg_, "dec3", b, b, 3, 1, 1, cfg.seed);
    dec4_ = Conv2dLayer::make(reg_, "dec4", b, cfg.image_channels, 1, 1, 0, cfg.seed);
}

Var TinyAutoencoderCodec::encode(Graph& g, const Var& x) {
    const Shape s = x->value.shape;
    if (s.c != cfg_.image_channels)
        throw ShapeError("codec encode expects " + std::to_string(cfg_.image_channels) +
                         " channels, got " + s.str());
    if (s.h % spatial_factor() != 0 || s.w % spatial_factor() != 0)
        throw ShapeError("codec encode needs spatial size divisible by " +
                         std::to_string(spatial_factor()) + ", got " + s.str());
    const bool train = !frozen_;
    Var h = silu(g, enc1_.forward(g, x, train));
    h = silu(g, enc2_.forward(g, h, train));
    return enc3_.forward(g, h, train);
}

Var TinyAutoencoderCodec::decode(Graph& g, const Var& z) {
    if (z->value.shape.c != cfg_.latent_channels)
        throw ShapeError("codec decode expects " + std::to_string(cfg_.latent_channels) +
                         " channels, got " + z->value.shape.str());
    const bool train = !frozen_;
    Var h = silu(g, dec1_.forward(g, z, train));
    h = upsample_nearest2(g, h);
    h = silu(g, dec2_.forward(g, h, train));
    h = upsample_nearest2(g, h);
    h = silu(g, dec3_.forward(g, h, train));
    return sigmoid(g, dec4_.forward(g, h, train));
}

// ---------------------------------------------------------------------------
// MiniUNet
// ---------------------------------------------------------------------------

MiniUNet::ResBlock MiniUNet::make_block(const std::string& name, int channels) {
    ResBlock b;
    b.gn1 = GroupNormLayer::make(reg_, name + ".gn1", channels, cfg_.groups);
    b.conv1 = Conv2dLayer::make(reg_, name + ".conv1", channels, channels, 3, 1, 1, cfg_.seed);
    b.t_proj = LinearLayer::make(reg_, name + ".t_proj", cfg_.temb_dim, channels, cfg_.seed);
    b.gn2 = GroupNormLayer::make(reg_, name + ".gn2", channels, cfg_.groups);
    b.conv2 = Conv2dLayer::make(reg_, name + ".conv2", channels, channels, 3, 1, 1, cfg_.seed);
    return b;
}

MiniUNet::MiniUNet(const DenoiserConfig& cfg) : cfg_(cfg) {
    if (cfg.base_channels % cfg.groups != 0)
        throw ConfigError("denoiser base_channels must be divisible by groups");
    if (cfg.temb_dim % 2 != 0) throw ConfigError("denoiser temb_dim must be even");
    const int b = cfg.base_channels;
    conv_in_ = Conv2dLayer::make(reg_, "conv_in", 2 * cfg.latent_channels, b, 3, 1, 1, cfg.seed);
    temb_fc1_ = LinearLayer::make(reg_, "temb_fc1", cfg.temb_dim, cfg.temb_dim, cfg.seed);
    temb_fc2_ = LinearLayer::make(reg_, "temb_fc2", cfg.temb_dim, cfg.temb_dim, cfg.seed);
    rb1_ = make_block("rb1", b);
    down_ = Conv2dLayer::make(reg_, "down", b, 2 * b, 3, 2, 1, cfg.seed);
    rb2_ = make_block("rb2", 2 * b);
    up_conv_ = Conv2dLayer::make(reg_, "up_conv", 2 * b, b, 3, 1, 1, cfg.seed);
    fuse_ = Conv2dLayer::make(reg_, "fuse", 2 * b, b, 3, 1, 1, cfg.seed);
    rb3_ = make_block("rb3", b);
    out_norm_ = GroupNormLayer::make(reg_, "out_norm", b, cfg.groups);
    conv_out_ =
        Conv2dLayer::make(reg_, "conv_out", b, cfg.latent_channels, 3, 1, 1, cfg.seed, true);
}

nn::Tensor MiniUNet::time_embedding(int t, int batch) const {
    const int half = cfg_.temb_dim / 2;
    Tensor emb(Shape{batch, cfg_.temb_dim, 1, 1});
    for (int i = 0; i < half; ++i) {
        const double freq =
            std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
        const double s = std::sin(static_cast<double>(t) * freq);
        const double c = std::cos(static_cast<double>(t) * freq);
        for (int n = 0; n < batch; ++n) {
            emb.at(n, 2 * i, 0, 0) = s;
            emb.at(n, 2 * i + 1, 0, 0) = c;
        }
    }
    return emb;
}

Var MiniUNet::run_block(Graph& g, const ResBlock& b, const Var& x, const Var& temb) const {
    Var h = b.conv1.forward(g, silu(g, b.gn1.forward(g, x, trainable_)), trainable_);
    h = add_channel_bias(g, h, b.t_proj.forward(g, temb, trainable_));
    h = b.conv2.forward(g, silu(g, b.gn2.forward(g, h, trainable_)), trainable_);
    return add(g, x, h);
}

Var MiniUNet::predict(Graph& g, const Var& x_t, const Var& y, int t) {
    check_same_shape(x_t->value, y->value, "denoiser predict");
    const Shape s = x_t->value.shape;
    if (s.c != cfg_.latent_channels)
        throw ShapeError("denoiser expects " + std::to_string(cfg_.latent_channels) +
                         " latent channels, got " + s.str());
    if (s.h % 2 != 0 || s.w % 2 != 0)
        throw ShapeError("denoiser needs even spatial size for down/up stage, got " + s.str());
    if (t < 1) throw IndexError("denoiser timestep must be >= 1");
    ++eval_calls_;

    Var temb = g.leaf(time_embedding(t, s.n), false);
    temb = temb_fc2_.forward(g, silu(g, temb_fc1_.forward(g, temb, trainable_)), trainable_);

    Var h = conv_in_.forward(g, concat_channels(g, x_t, y), trainable_);
    Var skip = run_block(g, rb1_, h, temb);
    Var mid = run_block(g, rb2_, down_.forward(g, skip, trainable_), temb);
    Var up = up_conv_.forward(g, upsample_nearest2(g, mid), trainable_);
    h = fuse_.forward(g, concat_channels(g, up, skip), trainable_);
    h = run_block(g, rb3_, h, temb);
    h = conv_out_.forward(g, silu(g, out_norm_.forward(g, h, trainable_)), trainable_);
    return add(g, x_t, h);
}

// ---------------------------------------------------------------------------
// PatchDiscriminator
// ---------------------------------------------------------------------------

PatchDiscriminator::PatchDiscriminator(const DiscriminatorConfig& cfg) : cfg_(cfg) {
    const int b = cfg.base_channels;
    c1_ = Conv2dLayer::make(reg_, "c1", cfg.latent_channels, b, 4, 2, 1, cfg.seed);
    c2_ = Conv2dLayer::make(reg_, "c2", b, 2 * b, 4, 2, 1, cfg.seed);
    c3_ = Conv2dLayer::make(reg_, "c3", 2 * b, 1, 4, 2, 1, cfg.seed);
}

Var PatchDiscriminator::score(Graph& g, const Var& z, bool trainable) {
    if (z->value.shape.c != cfg_.latent_channels)
        throw ShapeError("discriminator expects " + std::to_string(cfg_.latent_channels) +
                         " channels, got " + z->value.shape.str());
    Var h = leaky_relu(g, c1_.forward(g, z, trainable), 0.2);
    h = leaky_relu(g, c2_.forward(g, h, trainable), 0.2);
    return c3_.forward(g, h, trainable);
}

// ---------------------------------------------------------------------------
// RandomConvEmbedder
// ---------------------------------------------------------------------------

RandomConvEmbedder::RandomConvEmbedder(const EmbedderConfig& cfg) : cfg_(cfg) {
    const int b = cfg.base_channels;
    c1_ = Conv2dLayer::make(reg_, "c1", cfg.image_channels, b, 3, 2, 1, cfg.seed);
    c2_ = Conv2dLayer::make(reg_, "c2", b, 2 * b, 3, 2, 1, cfg.seed);
    c3_ = Conv2dLayer::make(reg_, "c3", 2 * b, 4 * b, 3, 2, 1, cfg.seed);
    head_ = LinearLayer::make(reg_, "head", 4 * b, cfg.dim, cfg.seed);
}

Var RandomConvEmbedder::embed(Graph& g, const Var& x) {
    Var h = bilinear_resize(g, x, cfg_.input_size, cfg_.input_size);
    h = leaky_relu(g, c1_.forward(g, h, false), 0.2);
    h = leaky_relu(g, c2_.forward(g, h, false), 0.2);
    h = leaky_relu(g, c3_.forward(g, h, false), 0.2);
    h = head_.forward(g, global_avg_pool(g, h), false);
    return l2_normalize_rows(g, h);
}

}  // namespace shiftsr
