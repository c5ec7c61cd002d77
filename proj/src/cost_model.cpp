#include "tpa/cost_model.hpp"

#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace tpa {

std::string to_string(MechanismKind k) {
    switch (k) {
        case MechanismKind::MHA: return "mha";
        case MechanismKind::MQA: return "mqa";
        case MechanismKind::GQA: return "gqa";
        case MechanismKind::MLA: return "mla";
        case MechanismKind::TPA: return "tpa";
        case MechanismKind::TPA_KVonly: return "tpa_kvonly";
        case MechanismKind::TPA_NonCtxA: return "tpa_nonctx_a";
        case MechanismKind::TPA_NonCtxB: return "tpa_nonctx_b";
    }
    return "?";
}

MechanismKind mechanism_from_string(const std::string& s) {
    if (s == "mha") return MechanismKind::MHA;
    if (s == "mqa") return MechanismKind::MQA;
    if (s == "gqa") return MechanismKind::GQA;
    if (s == "mla") return MechanismKind::MLA;
    if (s == "tpa") return MechanismKind::TPA;
    if (s == "tpa_kvonly") return MechanismKind::TPA_KVonly;
    if (s == "tpa_nonctx_a") return MechanismKind::TPA_NonCtxA;
    if (s == "tpa_nonctx_b") return MechanismKind::TPA_NonCtxB;
    throw std::invalid_argument("unknown mechanism kind: " + s);
}

namespace {

bool is_tpa_family(MechanismKind k) {
    return k == MechanismKind::TPA || k == MechanismKind::TPA_KVonly ||
           k == MechanismKind::TPA_NonCtxA || k == MechanismKind::TPA_NonCtxB;
}

}  // namespace

void MechanismSpec::validate() const {
    if (d_model < 1 || heads < 1 || head_dim < 1) {
        throw std::invalid_argument("MechanismSpec: d_model, heads, head_dim must be positive");
    }
    switch (kind) {
        case MechanismKind::GQA:
            if (groups < 1 || heads % groups != 0) {
                throw std::invalid_argument("MechanismSpec: GQA needs groups dividing heads");
            }
            break;
        case MechanismKind::MLA:
            if (mla_d_c < 1 || mla_d_c_prime < 1 || mla_d_h_rope < 1) {
                throw std::invalid_argument("MechanismSpec: MLA needs d_c, d_c', d_h^R");
            }
            break;
        default:
            break;
    }
    if (is_tpa_family(kind)) {
        if (rank_k < 1 || rank_v < 1) {
            throw std::invalid_argument("MechanismSpec: TPA needs rank_k, rank_v >= 1");
        }
        if (kind != MechanismKind::TPA_KVonly && rank_q < 1) {
            throw std::invalid_argument("MechanismSpec: TPA needs rank_q >= 1");
        }
    }
}

std::uint64_t kv_cache_numbers_per_token(const MechanismSpec& s) {
    s.validate();
    switch (s.kind) {
        case MechanismKind::MHA: return 2 * s.heads * s.head_dim;
        case MechanismKind::MQA: return 2 * s.head_dim;
        case MechanismKind::GQA: return 2 * s.groups * s.head_dim;
        case MechanismKind::MLA: return s.mla_d_c + s.mla_d_h_rope;
        case MechanismKind::TPA:
        case MechanismKind::TPA_KVonly: return (s.rank_k + s.rank_v) * (s.heads + s.head_dim);
        case MechanismKind::TPA_NonCtxA: return (s.rank_k + s.rank_v) * s.head_dim;
        case MechanismKind::TPA_NonCtxB: return (s.rank_k + s.rank_v) * s.heads;
    }
    throw std::invalid_argument("kv_cache_numbers_per_token: unsupported kind");
}

std::uint64_t attention_params(const MechanismSpec& s) {
    s.validate();
    const std::uint64_t dm = s.d_model, h = s.heads, dh = s.head_dim;
    switch (s.kind) {
        case MechanismKind::MHA: return 4 * dm * h * dh;
        case MechanismKind::MQA: return dm * dh * (2 * h + 2);
        case MechanismKind::GQA: return dm * dh * (2 * h + 2 * s.groups);
        case MechanismKind::MLA:
            return s.mla_d_c_prime * (dm + h * dh + h * s.mla_d_h_rope) +
                   dm * (s.mla_d_h_rope + h * dh) + s.mla_d_c * (dm + 2 * h * dh);
        case MechanismKind::TPA:
            return dm * (s.rank_q + s.rank_k + s.rank_v) * (h + dh) + dm * h * dh;
        case MechanismKind::TPA_KVonly:
            return dm * (s.rank_k + s.rank_v) * (h + dh) + 2 * dm * h * dh;
        case MechanismKind::TPA_NonCtxA:
            return (s.rank_q + s.rank_k + s.rank_v) * (dm * dh + h) + dm * h * dh;
        case MechanismKind::TPA_NonCtxB:
            return (s.rank_q + s.rank_k + s.rank_v) * (dm * h + dh) + dm * h * dh;
    }
    throw std::invalid_argument("attention_params: unsupported kind");
}

DecodeFlops decode_flops(const MechanismSpec& s) {
    s.validate();
    const std::uint64_t dm = s.d_model, h = s.heads, dh = s.head_dim;
    const std::uint64_t feat_d = dh, feat_e = dh;
    DecodeFlops out;
    switch (s.kind) {
        case MechanismKind::MHA:
            out.projection = 3 * dm * h * dh;
            out.attention_per_token_coeff = 2 * h * dh;
            return out;
        case MechanismKind::MQA:
            out.projection = dm * (h + 2) * dh;
            out.attention_per_token_coeff = 2 * h * dh;
            return out;
        case MechanismKind::GQA:
            out.projection = dm * (h + 2 * s.groups) * dh;
            out.attention_per_token_coeff = 2 * h * dh;
            return out;
        case MechanismKind::MLA:
            out.projection = dm * ((s.mla_d_c + s.mla_d_h_rope) * h + s.mla_d_c + s.mla_d_h_rope);
            out.attention_per_token_coeff = h * (2 * s.mla_d_c + s.mla_d_h_rope);
            return out;
        case MechanismKind::TPA:
        case MechanismKind::TPA_NonCtxA:
        case MechanismKind::TPA_NonCtxB: {
            // projection covers contextual maps only
            if (s.kind == MechanismKind::TPA) {
                out.projection = dm * (s.rank_q + s.rank_k + s.rank_v) * (h + dh);
            } else if (s.kind == MechanismKind::TPA_NonCtxA) {
                out.projection = dm * (s.rank_q + s.rank_k + s.rank_v) * dh;
            } else {
                out.projection = dm * (s.rank_q + s.rank_k + s.rank_v) * h;
            }
            out.attention_per_token_coeff =
                s.rank_k * (s.rank_q * feat_d + h * s.rank_q + h) + s.rank_v * h * (1 + feat_e);
            return out;
        }
        case MechanismKind::TPA_KVonly:
            out.projection = dm * (h * dh + (s.rank_k + s.rank_v) * (h + dh));
            // dense query: feature dots are per head, nothing is head-shared
            out.attention_per_token_coeff =
                s.rank_k * h * (feat_d + 1) + s.rank_v * h * (1 + feat_e);
            return out;
    }
    throw std::invalid_argument("decode_flops: unsupported kind");
}

SpeedupCheck specialized_speedup_holds(const MechanismSpec& s, std::uint64_t feat_d,
                                       std::uint64_t feat_e) {
    if (!is_tpa_family(s.kind)) {
        throw std::invalid_argument("specialized_speedup_holds: TPA specs only");
    }
    s.validate();
    SpeedupCheck c;
    c.lhs = s.rank_q * s.rank_k * feat_d + s.heads * s.rank_q * s.rank_k +
            s.heads * s.rank_v * feat_e;
    c.rhs = 2 * s.heads * feat_d;
    c.holds = c.lhs < c.rhs;
    return c;
}

namespace {

MechanismSpec spec_from_json(const nlohmann::json& j) {
    MechanismSpec s;
    s.kind = mechanism_from_string(j.at("kind").get<std::string>());
    s.d_model = j.at("d_model").get<std::uint64_t>();
    s.heads = j.at("heads").get<std::uint64_t>();
    s.head_dim = j.at("head_dim").get<std::uint64_t>();
    s.groups = j.value("groups", 0ULL);
    s.rank_q = j.value("rank_q", 0ULL);
    s.rank_k = j.value("rank_k", 0ULL);
    s.rank_v = j.value("rank_v", 0ULL);
    s.mla_d_c = j.value("mla_d_c", 0ULL);
    s.mla_d_c_prime = j.value("mla_d_c_prime", 0ULL);
    s.mla_d_h_rope = j.value("mla_d_h_rope", 0ULL);
    s.validate();
    return s;
}

nlohmann::json spec_to_json(const MechanismSpec& s) {
    nlohmann::json j;
    j["kind"] = to_string(s.kind);
    j["d_model"] = s.d_model;
    j["heads"] = s.heads;
    j["head_dim"] = s.head_dim;
    if (s.groups > 0) j["groups"] = s.groups;
    if (s.rank_q > 0) j["rank_q"] = s.rank_q;
    if (s.rank_k > 0) j["rank_k"] = s.rank_k;
    if (s.rank_v > 0) j["rank_v"] = s.rank_v;
    if (s.mla_d_c > 0) j["mla_d_c"] = s.mla_d_c;
    if (s.mla_d_c_prime > 0) j["mla_d_c_prime"] = s.mla_d_c_prime;
    if (s.mla_d_h_rope > 0) j["mla_d_h_rope"] = s.mla_d_h_rope;
    return j;
}

}  // namespace

std::vector<MechanismSpec> parse_specs_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);  // throws with byte position on bad input
    if (!j.is_array()) {
        throw std::invalid_argument("spec file must hold a JSON array of mechanism specs");
    }
    std::vector<MechanismSpec> specs;
    specs.reserve(j.size());
    for (const auto& item : j) specs.push_back(spec_from_json(item));
    return specs;
}

std::string specs_to_json(const std::vector<MechanismSpec>& specs) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : specs) arr.push_back(spec_to_json(s));
    return arr.dump(2);
}

std::string cost_table_csv(const std::vector<MechanismSpec>& specs) {
    std::ostringstream out;
    out << "kind,params,kv_numbers_per_token,projection_flops,attention_coeff\r\n";
    for (const auto& s : specs) {
        const auto flops = decode_flops(s);
        out << to_string(s.kind) << ',' << attention_params(s) << ','
            << kv_cache_numbers_per_token(s) << ',' << flops.projection << ','
            << flops.attention_per_token_coeff << "\r\n";
    }
    return out.str();
}

}  // namespace tpa
