#pragma once

#include <cstdint>
#include <vector>

#include "wmlab/core.hpp"
#include "wmlab/rng.hpp"

namespace wmlab {

struct CodecConfig {
    int n = 16;             // message length (100 for paper-parity runs)
    int channels = 1;
    int side = 32;
    int filters = 16;       // hidden filter count F
    double strength = 0.05; // embedding strength s
    uint64_t seed = 0;

    void validate() const;
};

// 3x3 convolution, zero padding, stride 1. Weights [out][in][ky][kx].
struct ConvLayer {
    int in_ch = 0;
    int out_ch = 0;
    std::vector<float> w;  // out*in*9
    std::vector<float> b;  // out
};

struct DenseLayer {
    int in = 0;
    int out = 0;
    std::vector<float> w;  // out*in
    std::vector<float> b;  // out
};

// Encoder: [x | bit planes] -> conv -> relu -> conv -> relu -> conv -> tanh,
// w = clamp(x + strength * tanh_out). Decoder: conv -> relu -> conv -> relu ->
// global average pool -> dense -> per-bit logistic.
struct CodecParams {
    CodecConfig config;
    ConvLayer enc1, enc2, enc3;
    ConvLayer dec1, dec2;
    DenseLayer head;
};

// Per-bit decoder beliefs, clamped to [1e-6, 1 - 1e-6].
struct BitProbabilities {
    std::vector<double> p;
    size_t size() const { return p.size(); }
};

inline constexpr double kProbClamp = 1e-6;

// Mutable views over all parameter tensors in serialization order:
// enc1.w, enc1.b, enc2.w, enc2.b, enc3.w, enc3.b,
// dec1.w, dec1.b, dec2.w, dec2.b, head.w, head.b.
struct TensorView {
    float* data;
    size_t size;
};
std::vector<TensorView> tensor_views(CodecParams& params);
// First tensors of the list above belong to the encoder.
inline constexpr size_t kEncoderTensorCount = 6;
size_t total_weight_count(const CodecParams& params);

// Deterministic fan-scaled uniform initialization, zero biases.
CodecParams init_codec(const CodecConfig& config, uint64_t seed);
inline CodecParams init_codec(const CodecConfig& config) {
    return init_codec(config, config.seed);
}

Image encode(const CodecParams& params, const Image& x, const BitMessage& t);

BitProbabilities decode_probs(const CodecParams& params, const Image& img);
// Residual input is shifted by +0.5 so the same decoder weights apply.
BitProbabilities decode_probs(const CodecParams& params, const ResidualImage& z);

// bit_i = 1 iff p_i > 0.5 (ties resolve to 0).
BitMessage decode_bits(const BitProbabilities& probs);

// ---------------------------------------------------------------------------
// Forward traces and backward passes (used by training and grad checks).
// Activations are planar ([channel][y*W+x]) double buffers.
// ---------------------------------------------------------------------------

struct PlanarBuf {
    int ch = 0, width = 0, height = 0;
    std::vector<double> v;

    void resize(int c, int w, int h) {
        ch = c;
        width = w;
        height = h;
        v.assign(static_cast<size_t>(c) * w * h, 0.0);
    }
    double* plane(int c) { return v.data() + static_cast<size_t>(c) * width * height; }
    const double* plane(int c) const {
        return v.data() + static_cast<size_t>(c) * width * height;
    }
    size_t plane_size() const { return static_cast<size_t>(width) * height; }
};

PlanarBuf planar_from_image(const Image& img);
Image image_from_planar(const PlanarBuf& buf);

struct EncoderTrace {
    PlanarBuf input;   // C+n planes
    PlanarBuf a1, z1;  // conv1 pre/post relu
    PlanarBuf a2, z2;
    PlanarBuf r;       // tanh output
    std::vector<double> w_pre;       // interleaved layout, before clamping
    std::vector<uint8_t> clamp_pass; // 1 where the output clamp was inactive
};

struct DecoderTrace {
    PlanarBuf input;
    PlanarBuf b1, y1;
    PlanarBuf b2, y2;
    std::vector<double> pooled;  // F
    std::vector<double> logits;  // n
    std::vector<double> p_raw;   // logistic outputs before clamping
    std::vector<uint8_t> p_pass; // 1 where the probability clamp was inactive
};

// Gradient buffers aligned index-for-index with tensor_views().
struct CodecGrads {
    std::vector<std::vector<double>> g;

    static CodecGrads zeros_like(CodecParams& params);
    void add(const CodecGrads& o, double scale = 1.0);
    void scale(double s);
};

Image encoder_forward(const CodecParams& params, const Image& x,
                      const BitMessage& t, EncoderTrace& trace);
BitProbabilities decoder_forward(const CodecParams& params,
                                 const PlanarBuf& input, DecoderTrace& trace);

// Backward from dL/dlogits. Writes decoder tensor gradients into `grads`
// (encoder slots untouched) and, when grad_input is non-null, the gradient
// w.r.t. the decoder input planes.
void decoder_backward(const CodecParams& params, const DecoderTrace& trace,
                      const std::vector<double>& grad_logits, CodecGrads& grads,
                      PlanarBuf* grad_input);

// Backward from dL/dw (interleaved layout, same shape as the image).
void encoder_backward(const CodecParams& params, const EncoderTrace& trace,
                      const std::vector<double>& grad_w, CodecGrads& grads);

// dL/dlogits for probabilities computed by decoder_forward: chains a
// dL/dp vector through the clamp mask and the logistic derivative.
std::vector<double> grad_probs_to_logits(const DecoderTrace& trace,
                                         const std::vector<double>& grad_p);

}  // namespace wmlab
