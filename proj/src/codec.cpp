#include "wmlab/codec.hpp"

#include <algorithm>
#include <cmath>

namespace wmlab {

void CodecConfig::validate() const {
    if (n < 1) throw std::invalid_argument("codec: message length must be >= 1");
    if (filters < 1) throw std::invalid_argument("codec: filter count must be >= 1");
    if (!(strength > 0.0) || strength > 0.5)
        throw std::invalid_argument("codec: strength must lie in (0, 0.5]");
    if (side < 8) throw std::invalid_argument("codec: image side must be >= 8");
    if (channels != 1 && channels != 3)
        throw std::invalid_argument("codec: channels must be 1 or 3");
}

std::vector<TensorView> tensor_views(CodecParams& p) {
    const auto conv = [](ConvLayer& l, std::vector<TensorView>& v) {
        v.push_back({l.w.data(), l.w.size()});
        v.push_back({l.b.data(), l.b.size()});
    };
    std::vector<TensorView> v;
    conv(p.enc1, v);
    conv(p.enc2, v);
    conv(p.enc3, v);
    conv(p.dec1, v);
    conv(p.dec2, v);
    v.push_back({p.head.w.data(), p.head.w.size()});
    v.push_back({p.head.b.data(), p.head.b.size()});
    return v;
}

size_t total_weight_count(const CodecParams& params) {
    auto& p = const_cast<CodecParams&>(params);
    size_t total = 0;
    for (const auto& t : tensor_views(p)) total += t.size;
    return total;
}

namespace {

ConvLayer make_conv(int in_ch, int out_ch) {
    ConvLayer l;
    l.in_ch = in_ch;
    l.out_ch = out_ch;
    l.w.assign(static_cast<size_t>(in_ch) * out_ch * 9, 0.f);
    l.b.assign(out_ch, 0.f);
    return l;
}

void init_conv(ConvLayer& l, Rng& rng) {
    const double bound = std::sqrt(6.0 / (l.in_ch * 9.0 + l.out_ch * 9.0));
    for (auto& v : l.w) v = static_cast<float>(rng.uniform(-bound, bound));
    std::fill(l.b.begin(), l.b.end(), 0.f);
}

// out[oc] = bias + sum_ic conv3x3(in[ic]); zero padding, stride 1.
void conv_forward(const PlanarBuf& in, const ConvLayer& l, PlanarBuf& out) {
    out.resize(l.out_ch, in.width, in.height);
    const int W = in.width, H = in.height;
    for (int oc = 0; oc < l.out_ch; ++oc) {
        double* op = out.plane(oc);
        const double bias = l.b[oc];
        std::fill(op, op + out.plane_size(), bias);
        for (int ic = 0; ic < l.in_ch; ++ic) {
            const double* ip = in.plane(ic);
            const float* wk = &l.w[(static_cast<size_t>(oc) * l.in_ch + ic) * 9];
            for (int ky = 0; ky < 3; ++ky) {
                const int dy = ky - 1;
                const int ylo = std::max(0, -dy), yhi = std::min(H, H - dy);
                for (int kx = 0; kx < 3; ++kx) {
                    const int dx = kx - 1;
                    const double wv = wk[ky * 3 + kx];
                    const int xlo = std::max(0, -dx), xhi = std::min(W, W - dx);
                    for (int y = ylo; y < yhi; ++y) {
                        double* orow = op + static_cast<size_t>(y) * W;
                        const double* irow =
                            ip + static_cast<size_t>(y + dy) * W + dx;
                        for (int x = xlo; x < xhi; ++x) orow[x] += wv * irow[x];
                    }
                }
            }
        }
    }
}

// Accumulates weight/bias gradients; optionally the input gradient.
void conv_backward(const PlanarBuf& in, const ConvLayer& l,
                   const PlanarBuf& grad_out, std::vector<double>& gw,
                   std::vector<double>& gb, PlanarBuf* grad_in) {
    const int W = in.width, H = in.height;
    if (grad_in) grad_in->resize(l.in_ch, W, H);
    for (int oc = 0; oc < l.out_ch; ++oc) {
        const double* gop = grad_out.plane(oc);
        double bsum = 0.0;
        for (size_t i = 0; i < grad_out.plane_size(); ++i) bsum += gop[i];
        gb[oc] += bsum;
        for (int ic = 0; ic < l.in_ch; ++ic) {
            const double* ip = in.plane(ic);
            double* gip = grad_in ? grad_in->plane(ic) : nullptr;
            const size_t wbase = (static_cast<size_t>(oc) * l.in_ch + ic) * 9;
            const float* wk = &l.w[wbase];
            for (int ky = 0; ky < 3; ++ky) {
                const int dy = ky - 1;
                const int ylo = std::max(0, -dy), yhi = std::min(H, H - dy);
                for (int kx = 0; kx < 3; ++kx) {
                    const int dx = kx - 1;
                    const int xlo = std::max(0, -dx), xhi = std::min(W, W - dx);
                    double wg = 0.0;
                    const double wv = wk[ky * 3 + kx];
                    for (int y = ylo; y < yhi; ++y) {
                        const double* gorow = gop + static_cast<size_t>(y) * W;
                        const double* irow =
                            ip + static_cast<size_t>(y + dy) * W + dx;
                        double* girow =
                            gip ? gip + static_cast<size_t>(y + dy) * W + dx
                                : nullptr;
                        double acc = 0.0;
                        if (girow) {
                            for (int x = xlo; x < xhi; ++x) {
                                acc += gorow[x] * irow[x];
                                girow[x] += wv * gorow[x];
                            }
                        } else {
                            for (int x = xlo; x < xhi; ++x) acc += gorow[x] * irow[x];
                        }
                        wg += acc;
                    }
                    gw[wbase + ky * 3 + kx] += wg;
                }
            }
        }
    }
}

void relu_forward(const PlanarBuf& a, PlanarBuf& z) {
    z.resize(a.ch, a.width, a.height);
    for (size_t i = 0; i < a.v.size(); ++i) z.v[i] = a.v[i] > 0.0 ? a.v[i] : 0.0;
}

void relu_backward(const PlanarBuf& a, const PlanarBuf& grad_z, PlanarBuf& grad_a) {
    grad_a.resize(a.ch, a.width, a.height);
    for (size_t i = 0; i < a.v.size(); ++i)
        grad_a.v[i] = a.v[i] > 0.0 ? grad_z.v[i] : 0.0;
}

}  // namespace

CodecParams init_codec(const CodecConfig& config, uint64_t seed) {
    config.validate();
    CodecParams p;
    p.config = config;
    const int C = config.channels, F = config.filters, n = config.n;
    p.enc1 = make_conv(C + n, F);
    p.enc2 = make_conv(F, F);
    p.enc3 = make_conv(F, C);
    p.dec1 = make_conv(C, F);
    p.dec2 = make_conv(F, F);
    p.head.in = F;
    p.head.out = n;
    p.head.w.assign(static_cast<size_t>(F) * n, 0.f);
    p.head.b.assign(n, 0.f);

    Rng rng(seed);
    init_conv(p.enc1, rng);
    init_conv(p.enc2, rng);
    init_conv(p.enc3, rng);
    init_conv(p.dec1, rng);
    init_conv(p.dec2, rng);
    const double bound = std::sqrt(6.0 / (p.head.in + p.head.out));
    for (auto& v : p.head.w) v = static_cast<float>(rng.uniform(-bound, bound));
    std::fill(p.head.b.begin(), p.head.b.end(), 0.f);
    return p;
}

PlanarBuf planar_from_image(const Image& img) {
    PlanarBuf buf;
    buf.resize(img.channels, img.width, img.height);
    const size_t ps = buf.plane_size();
    for (int c = 0; c < img.channels; ++c) {
        double* pl = buf.plane(c);
        for (size_t i = 0; i < ps; ++i) pl[i] = img.pixels[i * img.channels + c];
    }
    return buf;
}

Image image_from_planar(const PlanarBuf& buf) {
    Image img = Image::zeros(buf.width, buf.height, buf.ch);
    const size_t ps = buf.plane_size();
    for (int c = 0; c < buf.ch; ++c) {
        const double* pl = buf.plane(c);
        for (size_t i = 0; i < ps; ++i) img.pixels[i * buf.ch + c] = pl[i];
    }
    return img;
}

CodecGrads CodecGrads::zeros_like(CodecParams& params) {
    CodecGrads g;
    for (const auto& t : tensor_views(params)) g.g.emplace_back(t.size, 0.0);
    return g;
}

void CodecGrads::add(const CodecGrads& o, double scale) {
    for (size_t i = 0; i < g.size(); ++i)
        for (size_t j = 0; j < g[i].size(); ++j) g[i][j] += scale * o.g[i][j];
}

void CodecGrads::scale(double s) {
    for (auto& t : g)
        for (auto& v : t) v *= s;
}

Image encoder_forward(const CodecParams& params, const Image& x,
                      const BitMessage& t, EncoderTrace& trace) {
    const auto& cfg = params.config;
    if (x.width != cfg.side || x.height != cfg.side || x.channels != cfg.channels)
        throw std::invalid_argument("encode: image shape does not match codec");
    if (static_cast<int>(t.size()) != cfg.n)
        throw std::invalid_argument("encode: message length does not match codec");

    const int C = cfg.channels, n = cfg.n, W = x.width, H = x.height;
    trace.input.resize(C + n, W, H);
    const size_t ps = trace.input.plane_size();
    for (int c = 0; c < C; ++c) {
        double* pl = trace.input.plane(c);
        for (size_t i = 0; i < ps; ++i) pl[i] = x.pixels[i * C + c];
    }
    for (int i = 0; i < n; ++i) {
        double* pl = trace.input.plane(C + i);
        const double v = t.bits[i] ? 1.0 : -1.0;
        std::fill(pl, pl + ps, v);
    }

    conv_forward(trace.input, params.enc1, trace.a1);
    relu_forward(trace.a1, trace.z1);
    conv_forward(trace.z1, params.enc2, trace.a2);
    relu_forward(trace.a2, trace.z2);
    conv_forward(trace.z2, params.enc3, trace.r);
    for (auto& v : trace.r.v) v = std::tanh(v);

    Image w = Image::zeros(W, H, C);
    trace.w_pre.resize(w.pixels.size());
    trace.clamp_pass.assign(w.pixels.size(), 1);
    const double s = cfg.strength;
    for (int c = 0; c < C; ++c) {
        const double* rp = trace.r.plane(c);
        for (size_t i = 0; i < ps; ++i) {
            const size_t idx = i * C + c;
            const double pre = x.pixels[idx] + s * rp[i];
            trace.w_pre[idx] = pre;
            if (pre <= 0.0 || pre >= 1.0) {
                trace.clamp_pass[idx] = 0;
                w.pixels[idx] = pre <= 0.0 ? 0.0 : 1.0;
            } else {
                w.pixels[idx] = pre;
            }
        }
    }
    return w;
}

Image encode(const CodecParams& params, const Image& x, const BitMessage& t) {
    EncoderTrace trace;
    return encoder_forward(params, x, t, trace);
}

BitProbabilities decoder_forward(const CodecParams& params,
                                 const PlanarBuf& input, DecoderTrace& trace) {
    if (input.ch != params.config.channels)
        throw std::invalid_argument("decode: channel count does not match codec");
    trace.input = input;
    conv_forward(trace.input, params.dec1, trace.b1);
    relu_forward(trace.b1, trace.y1);
    conv_forward(trace.y1, params.dec2, trace.b2);
    relu_forward(trace.b2, trace.y2);

    const int F = params.config.filters, n = params.config.n;
    const double inv = 1.0 / static_cast<double>(trace.y2.plane_size());
    trace.pooled.assign(F, 0.0);
    for (int c = 0; c < F; ++c) {
        const double* pl = trace.y2.plane(c);
        double acc = 0.0;
        for (size_t i = 0; i < trace.y2.plane_size(); ++i) acc += pl[i];
        trace.pooled[c] = acc * inv;
    }

    trace.logits.assign(n, 0.0);
    for (int i = 0; i < n; ++i) {
        double acc = params.head.b[i];
        const float* wrow = &params.head.w[static_cast<size_t>(i) * F];
        for (int c = 0; c < F; ++c) acc += static_cast<double>(wrow[c]) * trace.pooled[c];
        trace.logits[i] = acc;
    }

    trace.p_raw.resize(n);
    trace.p_pass.assign(n, 1);
    BitProbabilities probs;
    probs.p.resize(n);
    for (int i = 0; i < n; ++i) {
        const double p = 1.0 / (1.0 + std::exp(-trace.logits[i]));
        trace.p_raw[i] = p;
        if (p < kProbClamp) {
            probs.p[i] = kProbClamp;
            trace.p_pass[i] = 0;
        } else if (p > 1.0 - kProbClamp) {
            probs.p[i] = 1.0 - kProbClamp;
            trace.p_pass[i] = 0;
        } else {
            probs.p[i] = p;
        }
    }
    return probs;
}

BitProbabilities decode_probs(const CodecParams& params, const Image& img) {
    if (img.width != params.config.side || img.height != params.config.side)
        throw std::invalid_argument("decode: image shape does not match codec");
    DecoderTrace trace;
    return decoder_forward(params, planar_from_image(img), trace);
}

BitProbabilities decode_probs(const CodecParams& params, const ResidualImage& z) {
    if (z.width != params.config.side || z.height != params.config.side ||
        z.channels != params.config.channels)
        throw std::invalid_argument("decode: residual shape does not match codec");
    PlanarBuf buf;
    buf.resize(z.channels, z.width, z.height);
    const size_t ps = buf.plane_size();
    for (int c = 0; c < z.channels; ++c) {
        double* pl = buf.plane(c);
        for (size_t i = 0; i < ps; ++i) pl[i] = z.values[i * z.channels + c] + 0.5;
    }
    DecoderTrace trace;
    return decoder_forward(params, buf, trace);
}

BitMessage decode_bits(const BitProbabilities& probs) {
    std::vector<uint8_t> bits(probs.p.size());
    for (size_t i = 0; i < probs.p.size(); ++i) bits[i] = probs.p[i] > 0.5 ? 1 : 0;
    return BitMessage(std::move(bits));
}

std::vector<double> grad_probs_to_logits(const DecoderTrace& trace,
                                         const std::vector<double>& grad_p) {
    std::vector<double> gl(grad_p.size());
    for (size_t i = 0; i < grad_p.size(); ++i) {
        if (!trace.p_pass[i]) {
            gl[i] = 0.0;
            continue;
        }
        const double p = trace.p_raw[i];
        gl[i] = grad_p[i] * p * (1.0 - p);
    }
    return gl;
}

void decoder_backward(const CodecParams& params, const DecoderTrace& trace,
                      const std::vector<double>& grad_logits, CodecGrads& grads,
                      PlanarBuf* grad_input) {
    const int F = params.config.filters, n = params.config.n;
    // Tensor slots: 6..9 are dec1/dec2 w+b, 10..11 the dense head.
    auto& g_dec1_w = grads.g[6];
    auto& g_dec1_b = grads.g[7];
    auto& g_dec2_w = grads.g[8];
    auto& g_dec2_b = grads.g[9];
    auto& g_head_w = grads.g[10];
    auto& g_head_b = grads.g[11];

    std::vector<double> g_pooled(F, 0.0);
    for (int i = 0; i < n; ++i) {
        const double gl = grad_logits[i];
        g_head_b[i] += gl;
        const float* wrow = &params.head.w[static_cast<size_t>(i) * F];
        double* gwrow = &g_head_w[static_cast<size_t>(i) * F];
        for (int c = 0; c < F; ++c) {
            gwrow[c] += gl * trace.pooled[c];
            g_pooled[c] += gl * static_cast<double>(wrow[c]);
        }
    }

    PlanarBuf g_y2;
    g_y2.resize(F, trace.y2.width, trace.y2.height);
    const double inv = 1.0 / static_cast<double>(trace.y2.plane_size());
    for (int c = 0; c < F; ++c) {
        double* pl = g_y2.plane(c);
        const double v = g_pooled[c] * inv;
        std::fill(pl, pl + g_y2.plane_size(), v);
    }

    PlanarBuf g_b2, g_y1, g_b1;
    relu_backward(trace.b2, g_y2, g_b2);
    conv_backward(trace.y1, params.dec2, g_b2, g_dec2_w, g_dec2_b, &g_y1);
    relu_backward(trace.b1, g_y1, g_b1);
    conv_backward(trace.input, params.dec1, g_b1, g_dec1_w, g_dec1_b, grad_input);
}

void encoder_backward(const CodecParams& params, const EncoderTrace& trace,
                      const std::vector<double>& grad_w, CodecGrads& grads) {
    const auto& cfg = params.config;
    const int C = cfg.channels;
    const size_t ps = trace.r.plane_size();

    // Through the output clamp, the strength scaling and tanh.
    PlanarBuf g_a3;
    g_a3.resize(C, trace.r.width, trace.r.height);
    for (int c = 0; c < C; ++c) {
        const double* rp = trace.r.plane(c);
        double* gp = g_a3.plane(c);
        for (size_t i = 0; i < ps; ++i) {
            const size_t idx = i * C + c;
            const double gw = trace.clamp_pass[idx] ? grad_w[idx] : 0.0;
            gp[i] = gw * cfg.strength * (1.0 - rp[i] * rp[i]);
        }
    }

    auto& g_enc1_w = grads.g[0];
    auto& g_enc1_b = grads.g[1];
    auto& g_enc2_w = grads.g[2];
    auto& g_enc2_b = grads.g[3];
    auto& g_enc3_w = grads.g[4];
    auto& g_enc3_b = grads.g[5];

    PlanarBuf g_z2, g_a2, g_z1, g_a1;
    conv_backward(trace.z2, params.enc3, g_a3, g_enc3_w, g_enc3_b, &g_z2);
    relu_backward(trace.a2, g_z2, g_a2);
    conv_backward(trace.z1, params.enc2, g_a2, g_enc2_w, g_enc2_b, &g_z1);
    relu_backward(trace.a1, g_z1, g_a1);
    conv_backward(trace.input, params.enc1, g_a1, g_enc1_w, g_enc1_b, nullptr);
}

}  // namespace wmlab
