#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tpa {

enum class MechanismKind {
    MHA,
    MQA,
    GQA,
    MLA,
    TPA,
    TPA_KVonly,
    TPA_NonCtxA,
    TPA_NonCtxB,
};

std::string to_string(MechanismKind k);
MechanismKind mechanism_from_string(const std::string& s);

// One mechanism/configuration row for the analytic calculators. Only the
// fields the kind needs are read; the rest are ignored.
struct MechanismSpec {
    MechanismKind kind = MechanismKind::MHA;
    std::uint64_t d_model = 0;
    std::uint64_t heads = 0;     // H
    std::uint64_t head_dim = 0;  // d_h (= D = E)
    std::uint64_t groups = 0;    // GQA key/value head groups g
    std::uint64_t rank_q = 0, rank_k = 0, rank_v = 0;
    std::uint64_t mla_d_c = 0;       // compressed KV dim
    std::uint64_t mla_d_c_prime = 0; // compressed query dim
    std::uint64_t mla_d_h_rope = 0;  // per-head rotary dim d_h^R

    void validate() const;  // throws std::invalid_argument
};

// Cached numbers per token (element count, not bytes).
std::uint64_t kv_cache_numbers_per_token(const MechanismSpec& spec);

// Attention-layer parameter count, including the output projection. The
// MHA/MQA/GQA forms are the generalized ones d_model*d_h*(...) which reduce
// to the familiar d_model^2 multiples when h*d_h == d_model.
std::uint64_t attention_params(const MechanismSpec& spec);

struct DecodeFlops {
    std::uint64_t projection = 0;                // one-off per decoded token
    std::uint64_t attention_per_token_coeff = 0; // multiplies the cache length M
};

// Per-step decode cost split into the constant projection term and the
// coefficient of the cache length M.
DecodeFlops decode_flops(const MechanismSpec& spec);

struct SpeedupCheck {
    bool holds = false;  // strict inequality
    std::uint64_t lhs = 0;
    std::uint64_t rhs = 0;
};

// Factor-space vs materialized per-token FLOPs:
// R_Q R_K D + H R_Q R_K + H R_V E  <  2 H D
SpeedupCheck specialized_speedup_holds(const MechanismSpec& spec, std::uint64_t feat_d,
                                       std::uint64_t feat_e);

// JSON array <-> specs, used by the calc subcommand.
std::vector<MechanismSpec> parse_specs_json(const std::string& text);
std::string specs_to_json(const std::vector<MechanismSpec>& specs);

// CSV table (RFC 4180, fixed column order) of all calculators over a spec
// list: kind,params,kv_numbers_per_token,projection_flops,attention_coeff
std::string cost_table_csv(const std::vector<MechanismSpec>& specs);

}  // namespace tpa
