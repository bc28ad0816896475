#include "sgenet/profiler.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace sgenet::prof {

const char* to_string(LayerKind k) {
    switch (k) {
        case LayerKind::kConv2d: return "conv2d";
        case LayerKind::kLinear: return "linear";
        case LayerKind::kLayerNorm: return "layernorm";
        case LayerKind::kSpatialNorm: return "spatial_norm";
        case LayerKind::kMultiHeadAttention: return "multi_head_attention";
        case LayerKind::kBidirRecurrent: return "bidir_recurrent";
        case LayerKind::kPixelShuffle: return "pixel_shuffle";
        case LayerKind::kChannelAttention: return "channel_attention";
        case LayerKind::kActivation: return "activation";
        case LayerKind::kSoftmax: return "softmax";
        case LayerKind::kElementwise: return "elementwise";
    }
    return "?";
}

LayerSpec LayerSpec::conv2d(std::string name, int cin, int cout, int kh, int kw, int ho,
                            int wo, bool bias) {
    LayerSpec s;
    s.name = std::move(name);
    s.kind = LayerKind::kConv2d;
    s.cin = cin;
    s.cout = cout;
    s.kh = kh;
    s.kw = kw;
    s.ho = ho;
    s.wo = wo;
    s.has_param = bias;
    return s;
}
LayerSpec LayerSpec::linear(std::string name, int din, int dout, int64_t tokens) {
    LayerSpec s;
    s.name = std::move(name);
    s.kind = LayerKind::kLinear;
    s.din = din;
    s.dout = dout;
    s.tokens = tokens;
    return s;
}
LayerSpec LayerSpec::layer_norm(std::string name, int d, int64_t tokens) {
    LayerSpec s;
    s.name = std::move(name);
    s.kind = LayerKind::kLayerNorm;
    s.dim = d;
    s.tokens = tokens;
    return s;
}
LayerSpec LayerSpec::spatial_norm(std::string name, int c, int64_t hw) {
    LayerSpec s;
    s.name = std::move(name);
    s.kind = LayerKind::kSpatialNorm;
    s.channels = c;
    s.hw = hw;
    return s;
}
LayerSpec LayerSpec::attention(std::string name, int d, int heads, int64_t tq, int64_t tk) {
    LayerSpec s;
    s.name = std::move(name);
    s.kind = LayerKind::kMultiHeadAttention;
    s.dim = d;
    s.heads = heads;
    s.tq = tq;
    s.tk = tk;
    return s;
}
LayerSpec LayerSpec::recurrent(std::string name, int cin, int hidden, int steps, int rows) {
    LayerSpec s;
    s.name = std::move(name);
    s.kind = LayerKind::kBidirRecurrent;
    s.cin = cin;
    s.hidden = hidden;
    s.steps = steps;
    s.rows = rows;
    return s;
}
LayerSpec LayerSpec::pixel_shuffle(std::string name) {
    LayerSpec s;
    s.name = std::move(name);
    s.kind = LayerKind::kPixelShuffle;
    return s;
}
LayerSpec LayerSpec::channel_attention(std::string name, int c, int r, int64_t hw) {
    LayerSpec s;
    s.name = std::move(name);
    s.kind = LayerKind::kChannelAttention;
    s.channels = c;
    s.reduce = r;
    s.hw = hw;
    return s;
}
LayerSpec LayerSpec::activation(std::string name, int64_t elems, bool has_param) {
    LayerSpec s;
    s.name = std::move(name);
    s.kind = LayerKind::kActivation;
    s.elems = elems;
    s.has_param = has_param;
    return s;
}
LayerSpec LayerSpec::softmax(std::string name, int64_t rows, int64_t width) {
    LayerSpec s;
    s.name = std::move(name);
    s.kind = LayerKind::kSoftmax;
    s.rows = rows;
    s.tokens = width;
    return s;
}
LayerSpec LayerSpec::elementwise(std::string name, int64_t elems) {
    LayerSpec s;
    s.name = std::move(name);
    s.kind = LayerKind::kElementwise;
    s.elems = elems;
    return s;
}

int64_t count_params(const LayerSpec& s) {
    switch (s.kind) {
        case LayerKind::kConv2d:
            return s.cout * s.cin * s.kh * s.kw + (s.has_param ? s.cout : 0);
        case LayerKind::kLinear: return s.dout * s.din + s.dout;
        case LayerKind::kLayerNorm: return 2 * s.dim;
        case LayerKind::kSpatialNorm: return 2 * s.channels;
        case LayerKind::kMultiHeadAttention: return 4 * (s.dim * s.dim + s.dim);
        case LayerKind::kBidirRecurrent:
            return 2 * (3 * s.hidden * s.cin + 3 * s.hidden * s.hidden + 3 * s.hidden);
        case LayerKind::kPixelShuffle: return 0;
        case LayerKind::kChannelAttention: {
            const int64_t mid = s.channels / s.reduce;
            return mid * s.channels + mid + s.channels * mid + s.channels;
        }
        case LayerKind::kActivation: return s.has_param ? 1 : 0;
        case LayerKind::kSoftmax: return 0;
        case LayerKind::kElementwise: return 0;
    }
    throw std::invalid_argument("count_params: unknown layer kind");
}

int64_t count_flops(const LayerSpec& s) {
    switch (s.kind) {
        case LayerKind::kConv2d:
            return 2 * s.kh * s.kw * s.cin * s.cout * s.ho * s.wo +
                   (s.has_param ? s.cout * s.ho * s.wo : 0);
        case LayerKind::kLinear:
            return 2 * s.din * s.dout * s.tokens + s.dout * s.tokens;
        case LayerKind::kLayerNorm: return 7 * s.dim * s.tokens;
        case LayerKind::kSpatialNorm: return 7 * s.channels * s.hw;
        case LayerKind::kMultiHeadAttention: {
            const int64_t d = s.dim;
            int64_t f = 2 * (2 * d * d * s.tq + d * s.tq);  // q and out projections
            f += 2 * (2 * d * d * s.tk + d * s.tk);         // k and v projections
            f += s.tq * d;                                  // query scaling
            f += 2 * s.tq * s.tk * d;                       // scores
            f += 3 * s.tq * s.tk;                           // row softmax
            f += 2 * s.tq * s.tk * d;                       // weighted sum
            return f;
        }
        case LayerKind::kBidirRecurrent: {
            const int64_t h = s.hidden;
            const int64_t per_step = 2 * 3 * h * s.cin + 3 * h + 2 * 3 * h * h + 9 * h;
            return per_step * s.steps * s.rows * 2;
        }
        case LayerKind::kPixelShuffle: return 0;
        case LayerKind::kChannelAttention: {
            const int64_t c = s.channels, mid = c / s.reduce;
            return c * s.hw + 2 * c * mid + mid + mid + 2 * mid * c + c + c;
        }
        case LayerKind::kActivation: return s.elems;
        case LayerKind::kSoftmax: return 3 * s.rows * s.tokens;
        case LayerKind::kElementwise: return s.elems;
    }
    throw std::invalid_argument("count_flops: unknown layer kind");
}

int64_t CostReport::total_params() const {
    int64_t t = 0;
    for (const auto& r : rows) t += r.params;
    return t;
}
int64_t CostReport::total_flops() const {
    int64_t t = 0;
    for (const auto& r : rows) t += r.flops;
    return t;
}

std::string CostReport::to_text(const std::string& title) const {
    std::ostringstream os;
    os << title << "\n";
    os << "convention: MAC=2 FLOPs; bias/activation/elementwise=1 FLOP per element; "
          "softmax=3, norms=7 per element; shuffles free\n";
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-28s %12s %16s\n", "layer", "params", "flops");
    os << buf;
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%-28s %12lld %16lld\n", r.name.c_str(),
                      static_cast<long long>(r.params), static_cast<long long>(r.flops));
        os << buf;
    }
    std::snprintf(buf, sizeof(buf), "%-28s %12lld %16lld  (%.4f M, %.4f G)\n", "total",
                  static_cast<long long>(total_params()),
                  static_cast<long long>(total_flops()), total_params() / 1e6,
                  total_flops() / 1e9);
    os << buf;
    return os.str();
}

std::string CostReport::to_tsv() const {
    std::ostringstream os;
    for (const auto& r : rows)
        os << r.name << '\t' << r.params << '\t' << r.flops << '\n';
    os << "total\t" << total_params() << '\t' << total_flops() << '\n';
    return os.str();
}

CostReport profile_layers(const std::vector<LayerSpec>& specs) {
    CostReport rep;
    rep.rows.reserve(specs.size());
    for (const auto& s : specs)
        rep.rows.push_back({s.name, count_params(s), count_flops(s)});
    return rep;
}

// ---------------------------------------------------------------------------
// architecture inventories
// ---------------------------------------------------------------------------

namespace {
void attn_block_specs(std::vector<LayerSpec>& out, const std::string& prefix, int d,
                      int heads, int64_t tq, int64_t tk) {
    out.push_back(LayerSpec::attention(prefix + ".mha", d, heads, tq, tk));
    out.push_back(LayerSpec::elementwise(prefix + ".res1", tq * d));
    out.push_back(LayerSpec::layer_norm(prefix + ".ln1", d, tq));
    out.push_back(LayerSpec::linear(prefix + ".mlp.fc1", d, 2 * d, tq));
    out.push_back(LayerSpec::elementwise(prefix + ".mlp.relu", tq * 2 * d));
    out.push_back(LayerSpec::linear(prefix + ".mlp.fc2", 2 * d, d, tq));
    out.push_back(LayerSpec::elementwise(prefix + ".res2", tq * d));
    out.push_back(LayerSpec::layer_norm(prefix + ".ln2", d, tq));
}
}  // namespace

std::vector<LayerSpec> guidance_recognizer_specs(GuidanceArch arch, int in_h, int in_w,
                                                 int frames, int alphabet_size) {
    std::vector<LayerSpec> out;
    const int base = arch == GuidanceArch::kTiny ? 16 : 32;
    int h = in_h, w = in_w, cin = 3, idx = 0;
    while (h > 1) {
        const bool halve_w = w > frames;
        const int cout = base * (idx + 1);
        const int ho = h / 2, wo = halve_w ? w / 2 : w;
        out.push_back(LayerSpec::conv2d("g.conv" + std::to_string(idx + 1), cin, cout, 4,
                                        halve_w ? 4 : 3, ho, wo));
        out.push_back(LayerSpec::activation("g.act" + std::to_string(idx + 1),
                                            int64_t(cout) * ho * wo, true));
        cin = cout;
        h = ho;
        w = wo;
        ++idx;
    }
    out.push_back(LayerSpec::linear("g.head", cin, alphabet_size, frames));
    out.push_back(LayerSpec::softmax("g.softmax", frames, alphabet_size));
    return out;
}

std::vector<LayerSpec> sr_branch_specs(const SrConfig& cfg, int alphabet_size) {
    std::vector<LayerSpec> out;
    const int cf = cfg.cf, d = cfg.dim, l = cfg.frames;
    const int64_t hw = int64_t(cfg.in_h) * cfg.in_w;

    out.push_back(LayerSpec::conv2d("m.extract.conv", 3, cf, 9, 9, cfg.in_h, cfg.in_w));
    out.push_back(LayerSpec::activation("m.extract.act", cf * hw, true));

    out.push_back(LayerSpec::linear("m.semantic.embed", alphabet_size, d, l));
    out.push_back(LayerSpec::elementwise("m.semantic.pe", int64_t(l) * d));
    attn_block_specs(out, "m.semantic.block", d, cfg.heads, l, l);

    out.push_back(LayerSpec::elementwise("m.align.pe", hw * d));
    for (int i = 0; i < cfg.guidance_depth; ++i)
        attn_block_specs(out, "m.align.stage1." + std::to_string(i), d, cfg.heads, l, hw);
    for (int i = 0; i < cfg.guidance_depth; ++i)
        attn_block_specs(out, "m.align.stage2." + std::to_string(i), d, cfg.heads, hw, l);

    for (const char* p : {"p1", "p2", "p3"})
        out.push_back(LayerSpec::conv2d(std::string("m.fuse.") + p, 2 * cf, cf, 1, 1,
                                        cfg.in_h, cfg.in_w));
    out.push_back(LayerSpec::channel_attention("m.fuse.ca", cf, cfg.reduce, hw));
    out.push_back(LayerSpec::elementwise("m.fuse.gate", cf * hw));
    out.push_back(LayerSpec::elementwise("m.fuse.add", cf * hw));

    for (int i = 0; i < cfg.srbs; ++i) {
        const std::string p = "m.srb" + std::to_string(i);
        out.push_back(LayerSpec::conv2d(p + ".c1", cf, cf, 3, 3, cfg.in_h, cfg.in_w));
        out.push_back(LayerSpec::spatial_norm(p + ".n1", cf, hw));
        out.push_back(LayerSpec::activation(p + ".act", cf * hw, true));
        out.push_back(LayerSpec::conv2d(p + ".c2", cf, cf, 3, 3, cfg.in_h, cfg.in_w));
        out.push_back(LayerSpec::spatial_norm(p + ".n2", cf, hw));
        out.push_back(LayerSpec::recurrent(p + ".gru", cf, cf / 2, cfg.in_w, cfg.in_h));
        out.push_back(LayerSpec::elementwise(p + ".res", cf * hw));
    }

    const int s = cfg.scale;
    out.push_back(LayerSpec::conv2d("m.upsample.expand", cf, cf * s * s, 3, 3, cfg.in_h,
                                    cfg.in_w));
    out.push_back(LayerSpec::pixel_shuffle("m.upsample.shuffle"));
    out.push_back(LayerSpec::conv2d("m.upsample.to_rgb", cf, 3, 3, 3, cfg.in_h * s,
                                    cfg.in_w * s));
    out.push_back(
        LayerSpec::elementwise("m.upsample.sigmoid", int64_t(3) * cfg.in_h * s * cfg.in_w * s));
    return out;
}

std::vector<LayerSpec> full_model_specs(const SrConfig& cfg, int alphabet_size) {
    auto out = guidance_recognizer_specs(cfg.guidance_arch, cfg.in_h, cfg.in_w, cfg.frames,
                                         alphabet_size);
    auto sr = sr_branch_specs(cfg, alphabet_size);
    out.insert(out.end(), sr.begin(), sr.end());
    return out;
}

// ---------------------------------------------------------------------------
// reference table
// ---------------------------------------------------------------------------

std::vector<ReferenceRow> load_reference_table(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open reference table " + path);
    std::vector<ReferenceRow> rows;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream is(line);
        ReferenceRow r;
        std::string p, g;
        if (!(is >> r.method >> p >> g))
            throw std::runtime_error("malformed reference row: " + line);
        if (p != "-") r.params_m = std::stod(p);
        if (g != "-") r.flops_g = std::stod(g);
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw std::runtime_error("empty reference table " + path);
    return rows;
}

double reduction_percent(double ours, double theirs) {
    return (theirs - ours) / theirs * 100.0;
}

std::string compare_text(const CostReport& model, const std::vector<ReferenceRow>& table) {
    std::ostringstream os;
    const double mg = model.total_flops() / 1e9;
    const double mp = model.total_params() / 1e6;
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "this configuration: %.4f M params, %.4f GFLOPs per 16x64 input\n", mp, mg);
    os << buf;

    const ReferenceRow* sge = nullptr;
    for (const auto& r : table)
        if (r.method == "SGENet") sge = &r;

    os << "reference figures (published):\n";
    for (const auto& r : table) {
        std::snprintf(buf, sizeof(buf), "  %-10s params %6s M  flops %6s G", r.method.c_str(),
                      r.params_m ? std::to_string(*r.params_m).substr(0, 4).c_str() : "-",
                      r.flops_g ? std::to_string(*r.flops_g).substr(0, 4).c_str() : "-");
        os << buf;
        if (r.flops_g && mg > 0) {
            std::snprintf(buf, sizeof(buf), "  | this config vs %s: %.1f%% FLOPs reduction",
                          r.method.c_str(), reduction_percent(mg, *r.flops_g));
            os << buf;
        }
        os << "\n";
    }
    if (sge && sge->flops_g) {
        for (const auto& r : table) {
            if (&r == sge || !r.flops_g) continue;
            std::snprintf(buf, sizeof(buf),
                          "SGENet vs %s (reference figures): %.2f%% FLOPs reduction\n",
                          r.method.c_str(), reduction_percent(*sge->flops_g, *r.flops_g));
            os << buf;
        }
    }
    return os.str();
}

}  // namespace sgenet::prof
