#include "asid/accounting.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "asid/errors.hpp"

namespace asid {

namespace {

long long conv_params(int out, int in, int k, int groups = 1, bool bias = true) {
    return 1LL * out * (in / groups) * k * k + (bias ? out : 0);
}

long long linear_params(int in, int out, bool bias = true) {
    return 1LL * in * out + (bias ? out : 0);
}

// Builds one tree holding parameter counts and, when a geometry is set,
// multiply-add counts at the padded low-resolution size.
class CostBuilder {
public:
    CostBuilder(const ModelConfig& cfg, long long h, long long w)
        : cfg_(cfg), h_(h), w_(w) {}

    CostReport build() {
        CostReport root{"model", 0, 0, {}};
        const int C = cfg_.channels;
        const int s = cfg_.scale;
        root.children.push_back(conv_leaf("head", C, 3, 3));

        CostReport body{"body", 0, 0, {}};
        for (int b = 1; b <= cfg_.blocks; ++b) body.children.push_back(block(b));
        roll_up(body);
        root.children.push_back(std::move(body));

        root.children.push_back(conv_leaf("tail", C, C, 3));
        root.children.push_back(conv_leaf("up", 3 * s * s, C, 3));
        roll_up(root);
        return root;
    }

private:
    long long px() const { return h_ * w_; }

    long long conv_macs(int out, int in, int k, long long ho, long long wo,
                        int groups = 1) const {
        if (h_ == 0) return 0;
        return 1LL * out * (in / groups) * k * k * ho * wo;
    }

    CostReport conv_leaf(const std::string& name, int out, int in, int k,
                         int groups = 1) const {
        return {name, conv_params(out, in, k, groups),
                conv_macs(out, in, k, h_, w_, groups), {}};
    }

    static void roll_up(CostReport& node) {
        node.params = 0;
        node.macs = 0;
        for (const CostReport& c : node.children) {
            node.params += c.params;
            node.macs += c.macs;
        }
    }

    CostReport lm(int c) const {
        const int cr = se_bottleneck(cfg_, c);
        CostReport node{"lm", 0, 0, {}};
        node.children.push_back(conv_leaf("pw", c, c, 1));
        node.children.push_back(conv_leaf("dw", c, c, 3, c));
        // SE gate: two tiny linears applied once per image
        node.children.push_back({"se", linear_params(c, cr) + linear_params(cr, c),
                                 h_ ? 2LL * c * cr : 0, {}});
        roll_up(node);
        return node;
    }

    // One windowed-attention stage. `tokens` is the window token count;
    // producers own Q,K and the affinity product, consumers reuse a shared
    // affinity and pay only for V, the value product, and the FFN.
    CostReport sam_level(const std::string& name, int c, long long tokens,
                         bool producer) const {
        const int d = qk_dim(cfg_, c);
        const int h = ffn_hidden(cfg_, c);
        long long p = 2LL * c + linear_params(c, c) + 2LL * c +
                      linear_params(c, h) + linear_params(h, c);
        long long m = h_ ? 1LL * c * c * px() + px() * tokens * c + 2LL * c * h * px() : 0;
        if (producer) {
            p += 2 * linear_params(c, d);
            if (h_) m += 2LL * c * d * px() + px() * tokens * d;
        }
        return {name, p, m, {}};
    }

    // Channel attention stage: full-width Q,K,V and a CxC affinity.
    CostReport cam_level(const std::string& name) const {
        const int c = cfg_.channels;
        const int h = ffn_hidden(cfg_, c);
        const long long p = 2LL * c + 3 * linear_params(c, c) + 2LL * c +
                            linear_params(c, h) + linear_params(h, c);
        const long long m =
            h_ ? 3LL * c * c * px() + 2LL * px() * c * c + 2LL * c * h * px() : 0;
        return {name, p, m, {}};
    }

    CostReport sam(int c, bool producer) const {
        CostReport node{"sam", 0, 0, {}};
        node.children.push_back(
            sam_level("meso", c, 1LL * cfg_.meso * cfg_.meso, producer));
        node.children.push_back(
            sam_level("global", c, 1LL * cfg_.global * cfg_.global, producer));
        roll_up(node);
        return node;
    }

    CostReport esa() const {
        const int C = cfg_.channels;
        const int f = esa_width(C);
        CostReport node{"esa", 0, 0, {}};
        node.children.push_back(conv_leaf("conv1", f, C, 1));
        node.children.push_back(conv_leaf("conv_f", f, f, 1));
        long long h2 = 0, w2 = 0, hp = 0, wp = 0;
        if (h_) {
            h2 = (h_ - 3) / 2 + 1;
            w2 = (w_ - 3) / 2 + 1;
            const long long k = std::min<long long>({7, h2, w2});
            hp = (h2 - k) / 3 + 1;
            wp = (w2 - k) / 3 + 1;
        }
        node.children.push_back(
            {"conv2", conv_params(f, f, 3), conv_macs(f, f, 3, h2, w2), {}});
        for (const char* name : {"conv_max", "conv3", "conv3b"})
            node.children.push_back(
                {name, conv_params(f, f, 3), conv_macs(f, f, 3, hp, wp), {}});
        node.children.push_back(conv_leaf("conv4", C, f, 1));
        roll_up(node);
        return node;
    }

    CostReport block(int b) const {
        const std::vector<int> widths = unit_widths(cfg_);
        CostReport node{"block" + std::to_string(b), 0, 0, {}};
        for (int i = 1; i <= cfg_.units; ++i) {
            const int c = widths[i - 1];
            CostReport unit{"unit" + std::to_string(i), 0, 0, {}};
            unit.children.push_back(lm(c));
            unit.children.push_back(sam(c, sam_is_producer(cfg_, b, i)));
            roll_up(unit);
            node.children.push_back(std::move(unit));
        }
        if (cfg_.refined_width > 0)
            node.children.push_back(conv_leaf("fuse", cfg_.channels, cfg_.channels, 1));
        CostReport cam{"cam", 0, 0, {}};
        cam.children.push_back(cam_level("meso"));
        cam.children.push_back(cam_level("global"));
        roll_up(cam);
        node.children.push_back(std::move(cam));
        node.children.push_back(esa());
        roll_up(node);
        return node;
    }

    const ModelConfig& cfg_;
    long long h_, w_; // padded low-resolution geometry; 0 = params only
};

std::string with_commas(long long v) {
    std::string digits = std::to_string(v);
    std::string out;
    const std::size_t first = digits[0] == '-' ? 1 : 0;
    for (std::size_t i = 0; i < digits.size(); ++i) {
        if (i > first && (digits.size() - i) % 3 == 0) out += ',';
        out += digits[i];
    }
    return out;
}

void text_rows(const CostReport& node, int depth, std::ostringstream& out) {
    std::string label(2 * static_cast<std::size_t>(depth), ' ');
    label += node.name;
    out << std::left << std::setw(34) << label << std::right << std::setw(14)
        << with_commas(node.params) << std::setw(20) << with_commas(node.macs)
        << "\n";
    for (const CostReport& c : node.children) text_rows(c, depth + 1, out);
}

void csv_rows(const CostReport& node, const std::string& prefix,
              std::ostringstream& out) {
    const std::string path = prefix.empty() ? node.name : prefix + "." + node.name;
    out << path << "," << node.params << "," << node.macs << "\n";
    for (const CostReport& c : node.children) csv_rows(c, path, out);
}

} // namespace

CostReport count_params(const ModelConfig& cfg) {
    validate(cfg);
    return CostBuilder(cfg, 0, 0).build();
}

CostReport count_macs(const ModelConfig& cfg, int out_h, int out_w) {
    validate(cfg);
    if (out_h <= 0 || out_w <= 0)
        throw ConfigError("evaluation geometry must be positive, got " +
                          std::to_string(out_w) + "x" + std::to_string(out_h));
    if (out_h % cfg.scale != 0 || out_w % cfg.scale != 0)
        throw ConfigError("evaluation geometry " + std::to_string(out_w) + "x" +
                          std::to_string(out_h) + " is not divisible by scale " +
                          std::to_string(cfg.scale));
    const long long mult = pad_multiple(cfg);
    long long h = out_h / cfg.scale, w = out_w / cfg.scale;
    h = (h + mult - 1) / mult * mult;
    w = (w + mult - 1) / mult * mult;
    return CostBuilder(cfg, h, w).build();
}

long long param_element_count(const ParamMap& params) {
    long long total = 0;
    for (const auto& [name, t] : params) total += t.numel();
    return total;
}

AblationTables ablation_sweep(int out_h, int out_w) {
    using KV = std::vector<std::pair<std::string, std::string>>;
    const std::vector<std::pair<std::string, KV>> variant_defs = {
        {"baseline", {{"variant", "baseline"}}},
        {"id", {{"refined_width", "0"}, {"share_mode", "none"}}},
        {"id+as", {{"refined_width", "0"}, {"share_mode", "intergroup"}}},
        {"id+cs", {{"share_mode", "none"}}},
        {"id+as+cs", {}},
    };
    const std::vector<std::pair<std::string, KV>> sharing_defs = {
        {"intergroup", {{"share_mode", "intergroup"}}},
        {"intragroup", {{"share_mode", "intragroup"}}},
    };

    AblationTables tables;
    auto run = [&](const std::vector<std::pair<std::string, KV>>& defs,
                   std::vector<AblationRow>& rows) {
        for (const auto& [label, kv] : defs) {
            AblationRow row;
            row.label = label;
            row.config = config_from_updates(kv);
            row.params = count_params(row.config).params;
            row.macs = count_macs(row.config, out_h, out_w).macs;
            rows.push_back(std::move(row));
        }
    };
    run(variant_defs, tables.variants);
    run(sharing_defs, tables.sharing);
    return tables;
}

std::string report_text(const CostReport& report) {
    std::ostringstream out;
    out << std::left << std::setw(34) << "module" << std::right << std::setw(14)
        << "params" << std::setw(20) << "macs" << "\n";
    text_rows(report, 0, out);
    out << "total params: " << with_commas(report.params) << "\n";
    out << "total macs: " << with_commas(report.macs)
        << "  (2x: " << with_commas(2 * report.macs) << ")\n";
    return out.str();
}

std::string report_csv(const CostReport& report) {
    std::ostringstream out;
    out << "module,params,macs\n";
    csv_rows(report, "", out);
    return out.str();
}

std::string ablation_text(const AblationTables& tables) {
    std::ostringstream out;
    auto table = [&](const char* title, const std::vector<AblationRow>& rows) {
        out << title << "\n";
        out << std::left << std::setw(12) << "variant" << std::right
            << std::setw(14) << "params" << std::setw(20) << "macs"
            << std::setw(20) << "2x macs" << "\n";
        for (const AblationRow& r : rows)
            out << std::left << std::setw(12) << r.label << std::right
                << std::setw(14) << with_commas(r.params) << std::setw(20)
                << with_commas(r.macs) << std::setw(20)
                << with_commas(2 * r.macs) << "\n";
    };
    table("ablation variants", tables.variants);
    out << "\n";
    table("attention sharing scope", tables.sharing);
    return out.str();
}

std::string ablation_csv(const AblationTables& tables) {
    std::ostringstream out;
    out << "table,variant,params,macs\n";
    for (const AblationRow& r : tables.variants)
        out << "variants," << r.label << "," << r.params << "," << r.macs << "\n";
    for (const AblationRow& r : tables.sharing)
        out << "sharing," << r.label << "," << r.params << "," << r.macs << "\n";
    return out.str();
}

} // namespace asid
