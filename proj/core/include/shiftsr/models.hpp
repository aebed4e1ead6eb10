#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "shiftsr/nn/graph.hpp"
#include "shiftsr/nn/layers.hpp"
#include "shiftsr/nn/tensor.hpp"

namespace shiftsr {

/// Anything holding persistent parameters that checkpoints can serialize.
class ParamOwner {
public:
    virtual ~ParamOwner() = default;
    virtual nn::ParamRegistry& params() = 0;
    virtual const nn::ParamRegistry& params() const = 0;
};

/// Latent codec pair: image [0,1] -> latent and back. A frozen codec takes
/// no parameter gradients but stays differentiable with respect to inputs.
class Codec : public ParamOwner {
public:
    virtual int spatial_factor() const = 0;
    virtual int latent_channels() const = 0;
    virtual bool frozen() const = 0;
    virtual void freeze() = 0;
    virtual nn::Var encode(nn::Graph& g, const nn::Var& x) = 0;
    virtual nn::Var decode(nn::Graph& g, const nn::Var& z) = 0;

    nn::Tensor encode_eval(const nn::Tensor& x);
    nn::Tensor decode_eval(const nn::Tensor& z);
};

/// Pass-through codec for pixel-space runs and exact unit tests.
class IdentityCodec : public Codec {
public:
    explicit IdentityCodec(int channels = 3) : channels_(channels) {}
    int spatial_factor() const override { return 1; }
    int latent_channels() const override { return channels_; }
    bool frozen() const override { return true; }
    void freeze() override {}
    nn::Var encode(nn::Graph& g, const nn::Var& x) override;
    nn::Var decode(nn::Graph& g, const nn::Var& z) override;
    nn::ParamRegistry& params() override { return reg_; }
    const nn::ParamRegistry& params() const override { return reg_; }

private:
    int channels_;
    nn::ParamRegistry reg_;
};

struct TinyAutoencoderConfig {
    int image_channels = 3;
    int base_channels = 16;
    int latent_channels = 8;
    std::uint64_t seed = 0;
};

/// Small convolutional autoencoder, spatial factor 4. Pretrained on the HR
/// corpus for reconstruction, then frozen for diffusion training. The
/// decoder ends in a sigmoid so decodes always land in [0,1].
class TinyAutoencoderCodec : public Codec {
public:
    explicit TinyAutoencoderCodec(const TinyAutoencoderConfig& cfg);
    int spatial_factor() const override { return 4; }
    int latent_channels() const override { return cfg_.latent_channels; }
    bool frozen() const override { return frozen_; }
    void freeze() override { frozen_ = true; }
    nn::Var encode(nn::Graph& g, const nn::Var& x) override;
    nn::Var decode(nn::Graph& g, const nn::Var& z) override;
    nn::ParamRegistry& params() override { return reg_; }
    const nn::ParamRegistry& params() const override { return reg_; }
    const TinyAutoencoderConfig& config() const { return cfg_; }

private:
    TinyAutoencoderConfig cfg_;
    bool frozen_ = false;
    nn::ParamRegistry reg_;
    nn::Conv2dLayer enc1_, enc2_, enc3_;
    nn::Conv2dLayer dec1_, dec2_, dec3_, dec4_;
};

/// Clean-signal predictor f(x_t, y, t) operating on latents.
class Denoiser : public ParamOwner {
public:
    virtual nn::Var predict(nn::Graph& g, const nn::Var& x_t, const nn::Var& y, int t) = 0;
    virtual void set_trainable(bool trainable) = 0;
    virtual bool trainable() const = 0;
    /// Total forward evaluations since construction (one per predict call).
    virtual std::int64_t eval_calls() const = 0;
};

struct DenoiserConfig {
    int latent_channels = 8;
    int base_channels = 16;
    int temb_dim = 32;
    int groups = 4;
    std::uint64_t seed = 0;
};

/// Miniature U-Net: one down/up stage, residual blocks with GroupNorm+SiLU,
/// sinusoidal t-embedding injected as per-block channel biases, y conditioning
/// by channel concatenation, zero-initialized output projection plus a global
/// residual from x_t.
class MiniUNet : public Denoiser {
public:
    explicit MiniUNet(const DenoiserConfig& cfg);
    nn::Var predict(nn::Graph& g, const nn::Var& x_t, const nn::Var& y, int t) override;
    void set_trainable(bool trainable) override { trainable_ = trainable; }
    bool trainable() const override { return trainable_; }
    std::int64_t eval_calls() const override { return eval_calls_; }
    nn::ParamRegistry& params() override { return reg_; }
    const nn::ParamRegistry& params() const override { return reg_; }
    const DenoiserConfig& config() const { return cfg_; }

private:
    struct ResBlock {
        nn::GroupNormLayer gn1, gn2;
        nn::Conv2dLayer conv1, conv2;
        nn::LinearLayer t_proj;
    };
    ResBlock make_block(const std::string& name, int channels);
    nn::Var run_block(nn::Graph& g, const ResBlock& b, const nn::Var& x,
                      const nn::Var& temb) const;
    nn::Tensor time_embedding(int t, int batch) const;

    DenoiserConfig cfg_;
    bool trainable_ = true;
    std::int64_t eval_calls_ = 0;
    nn::ParamRegistry reg_;
    nn::Conv2dLayer conv_in_;
    ResBlock rb1_, rb2_, rb3_;
    nn::Conv2dLayer down_, up_conv_, fuse_;
    nn::GroupNormLayer out_norm_;
    nn::Conv2dLayer conv_out_;
    nn::LinearLayer temb_fc1_, temb_fc2_;
};

struct DiscriminatorConfig {
    int latent_channels = 8;
    int base_channels = 32;
    std::uint64_t seed = 0;
};

/// Three stride-2 convolution stages scoring local latent patches.
class PatchDiscriminator : public ParamOwner {
public:
    explicit PatchDiscriminator(const DiscriminatorConfig& cfg);
    nn::Var score(nn::Graph& g, const nn::Var& z, bool trainable);
    nn::ParamRegistry& params() override { return reg_; }
    const nn::ParamRegistry& params() const override { return reg_; }
    const DiscriminatorConfig& config() const { return cfg_; }

private:
    DiscriminatorConfig cfg_;
    nn::ParamRegistry reg_;
    nn::Conv2dLayer c1_, c2_, c3_;
};

/// Image -> unit-norm embedding rows, differentiable with respect to the
/// image. Implementations resize internally to their input_size.
class Embedder : public ParamOwner {
public:
    virtual nn::Var embed(nn::Graph& g, const nn::Var& x) = 0;
    virtual int dim() const = 0;
    virtual int input_size() const = 0;
    virtual bool frozen() const = 0;
};

struct EmbedderConfig {
    int image_channels = 3;
    int input_size = 64;
    int base_channels = 16;
    int dim = 64;
    std::uint64_t seed = 77;
};

/// Frozen random-weight convolutional embedder, seed-pinned so embeddings
/// are reproducible across runs.
class RandomConvEmbedder : public Embedder {
public:
    explicit RandomConvEmbedder(const EmbedderConfig& cfg);
    nn::Var embed(nn::Graph& g, const nn::Var& x) override;
    int dim() const override { return cfg_.dim; }
    int input_size() const override { return cfg_.input_size; }
    bool frozen() const override { return true; }
    nn::ParamRegistry& params() override { return reg_; }
    const nn::ParamRegistry& params() const override { return reg_; }
    const EmbedderConfig& config() const { return cfg_; }

private:
    EmbedderConfig cfg_;
    nn::ParamRegistry reg_;
    nn::Conv2dLayer c1_, c2_, c3_;
    nn::LinearLayer head_;
};

}  // namespace shiftsr
