#include "tpa/serialize.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "json.hpp"

static_assert(std::endian::native == std::endian::little,
              "serialized payloads are little-endian doubles");

namespace tpa {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'T', 'P', 'A', 'F'};

json config_to_json(const TpaConfig& cfg) {
    json j;
    j["d_model"] = cfg.d_model;
    j["heads"] = cfg.heads;
    j["head_dim"] = cfg.head_dim;
    j["rank_q"] = cfg.rank_q;
    j["rank_k"] = cfg.rank_k;
    j["rank_v"] = cfg.rank_v;
    j["variant"] = to_string(cfg.variant);
    j["order"] = cfg.order == FactorOrder::Third ? "third" : "second";
    j["d_b"] = cfg.d_b;
    j["d_c"] = cfg.d_c;
    return j;
}

TpaVariant variant_from_string(const std::string& s) {
    if (s == "full") return TpaVariant::Full;
    if (s == "kvonly") return TpaVariant::KVonly;
    if (s == "non_contextual_a") return TpaVariant::NonContextualA;
    if (s == "non_contextual_b") return TpaVariant::NonContextualB;
    if (s == "shared_b") return TpaVariant::SharedB;
    throw std::invalid_argument("unknown variant: " + s);
}

TpaConfig config_from_json(const json& j) {
    TpaConfig cfg;
    cfg.d_model = j.at("d_model").get<std::size_t>();
    cfg.heads = j.at("heads").get<std::size_t>();
    cfg.head_dim = j.at("head_dim").get<std::size_t>();
    cfg.rank_q = j.at("rank_q").get<std::size_t>();
    cfg.rank_k = j.at("rank_k").get<std::size_t>();
    cfg.rank_v = j.at("rank_v").get<std::size_t>();
    cfg.variant = variant_from_string(j.at("variant").get<std::string>());
    cfg.order = j.at("order").get<std::string>() == "third" ? FactorOrder::Third
                                                            : FactorOrder::Second;
    cfg.d_b = j.at("d_b").get<std::size_t>();
    cfg.d_c = j.at("d_c").get<std::size_t>();
    return cfg;
}

struct TensorEntry {
    std::string name;
    std::size_t rows = 0, cols = 0, offset = 0;
};

void write_file(const std::string& path, const json& header, const std::vector<double>& payload) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open for writing: " + path);
    }
    const std::string head = header.dump();
    const std::uint64_t head_len = head.size();
    out.write(kMagic, 4);
    out.write(reinterpret_cast<const char*>(&head_len), sizeof(head_len));
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size() * sizeof(double)));
    if (!out) {
        throw std::runtime_error("write failed: " + path);
    }
}

std::pair<json, std::vector<double>> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open: " + path);
    }
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw std::runtime_error("not a TPAF container: " + path);
    }
    std::uint64_t head_len = 0;
    in.read(reinterpret_cast<char*>(&head_len), sizeof(head_len));
    std::string head(head_len, '\0');
    in.read(head.data(), static_cast<std::streamsize>(head_len));
    if (!in) {
        throw std::runtime_error("truncated header: " + path);
    }
    json header = json::parse(head);

    std::vector<double> payload;
    const auto pos = in.tellg();
    in.seekg(0, std::ios::end);
    const auto end = in.tellg();
    in.seekg(pos);
    const std::size_t bytes = static_cast<std::size_t>(end - pos);
    if (bytes % sizeof(double) != 0) {
        throw std::runtime_error("payload not a whole number of doubles: " + path);
    }
    payload.resize(bytes / sizeof(double));
    in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(bytes));
    if (!in) {
        throw std::runtime_error("truncated payload: " + path);
    }
    return {std::move(header), std::move(payload)};
}

void append_tensor(json& tensors, std::vector<double>& payload, const std::string& name,
                   const Matrix& m) {
    if (m.empty()) return;
    json t;
    t["name"] = name;
    t["rows"] = m.rows();
    t["cols"] = m.cols();
    t["offset"] = payload.size();
    tensors.push_back(t);
    payload.insert(payload.end(), m.data().begin(), m.data().end());
}

Matrix take_tensor(const json& tensors, const std::vector<double>& payload,
                   const std::string& name, bool required) {
    for (const auto& t : tensors) {
        if (t.at("name").get<std::string>() != name) continue;
        const std::size_t rows = t.at("rows").get<std::size_t>();
        const std::size_t cols = t.at("cols").get<std::size_t>();
        const std::size_t offset = t.at("offset").get<std::size_t>();
        if (offset + rows * cols > payload.size()) {
            throw std::runtime_error("tensor " + name + " exceeds payload");
        }
        return Matrix(rows, cols,
                      {payload.begin() + static_cast<std::ptrdiff_t>(offset),
                       payload.begin() + static_cast<std::ptrdiff_t>(offset + rows * cols)});
    }
    if (required) {
        throw std::runtime_error("missing tensor: " + name);
    }
    return {};
}

}  // namespace

void save_weights(const FactorWeights& w, const std::string& path) {
    json header;
    header["kind"] = "weights";
    header["config"] = config_to_json(w.cfg);
    json tensors = json::array();
    std::vector<double> payload;

    append_tensor(tensors, payload, "w_a_q", w.w_a_q);
    append_tensor(tensors, payload, "w_b_q", w.w_b_q);
    append_tensor(tensors, payload, "w_c_q", w.w_c_q);
    append_tensor(tensors, payload, "w_a_k", w.w_a_k);
    append_tensor(tensors, payload, "w_b_k", w.w_b_k);
    append_tensor(tensors, payload, "w_c_k", w.w_c_k);
    append_tensor(tensors, payload, "w_a_v", w.w_a_v);
    append_tensor(tensors, payload, "w_b_v", w.w_b_v);
    append_tensor(tensors, payload, "w_c_v", w.w_c_v);
    append_tensor(tensors, payload, "w_query_dense", w.w_query_dense);
    append_tensor(tensors, payload, "fixed_a_q", w.fixed_a_q);
    append_tensor(tensors, payload, "fixed_a_k", w.fixed_a_k);
    append_tensor(tensors, payload, "fixed_a_v", w.fixed_a_v);
    append_tensor(tensors, payload, "fixed_b_q", w.fixed_b_q);
    append_tensor(tensors, payload, "fixed_b_k", w.fixed_b_k);
    append_tensor(tensors, payload, "fixed_b_v", w.fixed_b_v);
    append_tensor(tensors, payload, "w_out", w.w_out);

    header["tensors"] = tensors;
    write_file(path, header, payload);
}

FactorWeights load_weights(const std::string& path) {
    auto [header, payload] = read_file(path);
    if (header.value("kind", "") != "weights") {
        throw std::runtime_error("container does not hold weights: " + path);
    }
    FactorWeights w;
    w.cfg = config_from_json(header.at("config"));
    w.cfg.validate();
    const auto& tensors = header.at("tensors");

    w.w_a_q = take_tensor(tensors, payload, "w_a_q", false);
    w.w_b_q = take_tensor(tensors, payload, "w_b_q", false);
    w.w_c_q = take_tensor(tensors, payload, "w_c_q", false);
    w.w_a_k = take_tensor(tensors, payload, "w_a_k", false);
    w.w_b_k = take_tensor(tensors, payload, "w_b_k", false);
    w.w_c_k = take_tensor(tensors, payload, "w_c_k", false);
    w.w_a_v = take_tensor(tensors, payload, "w_a_v", false);
    w.w_b_v = take_tensor(tensors, payload, "w_b_v", false);
    w.w_c_v = take_tensor(tensors, payload, "w_c_v", false);
    w.w_query_dense = take_tensor(tensors, payload, "w_query_dense", false);
    w.fixed_a_q = take_tensor(tensors, payload, "fixed_a_q", false);
    w.fixed_a_k = take_tensor(tensors, payload, "fixed_a_k", false);
    w.fixed_a_v = take_tensor(tensors, payload, "fixed_a_v", false);
    w.fixed_b_q = take_tensor(tensors, payload, "fixed_b_q", false);
    w.fixed_b_k = take_tensor(tensors, payload, "fixed_b_k", false);
    w.fixed_b_v = take_tensor(tensors, payload, "fixed_b_v", false);
    w.w_out = take_tensor(tensors, payload, "w_out", true);
    return w;
}

void save_cache(const FactorizedKvCache& cache, const std::string& path) {
    const auto& cfg = cache.config();
    json header;
    header["kind"] = "kv_cache";
    header["config"] = config_to_json(cfg);
    header["length"] = cache.size();
    json tensors = json::array();
    std::vector<double> payload;

    auto append_raw = [&](const std::string& name, std::span<const double> data,
                          std::size_t cols) {
        json t;
        t["name"] = name;
        t["rows"] = cols == 0 ? 0 : data.size() / cols;
        t["cols"] = cols;
        t["offset"] = payload.size();
        tensors.push_back(t);
        payload.insert(payload.end(), data.begin(), data.end());
    };
    append_raw("a_k", cache.raw_a_k(), cfg.heads);
    append_raw("b_k", cache.raw_b_k(), cfg.head_dim);
    append_raw("a_v", cache.raw_a_v(), cfg.heads);
    append_raw("b_v", cache.raw_b_v(), cfg.head_dim);

    header["tensors"] = tensors;
    write_file(path, header, payload);
}

FactorizedKvCache load_cache(const std::string& path) {
    auto [header, payload] = read_file(path);
    if (header.value("kind", "") != "kv_cache") {
        throw std::runtime_error("container does not hold a kv cache: " + path);
    }
    const TpaConfig cfg = config_from_json(header.at("config"));
    const std::size_t length = header.at("length").get<std::size_t>();
    const auto& tensors = header.at("tensors");

    const Matrix a_k = take_tensor(tensors, payload, "a_k", true);
    const Matrix b_k = take_tensor(tensors, payload, "b_k", true);
    const Matrix a_v = take_tensor(tensors, payload, "a_v", true);
    const Matrix b_v = take_tensor(tensors, payload, "b_v", true);
    return FactorizedKvCache::from_raw(cfg, length, a_k.data(), b_k.data(), a_v.data(),
                                       b_v.data());
}

}  // namespace tpa
