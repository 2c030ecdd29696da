#include <cstring>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "occ/errors.hpp"
#include "occ/model.hpp"

namespace occ {

namespace {

constexpr char kMagic[4] = {'O', 'C', 'C', 'N'};
constexpr std::uint32_t kVersion = 1;

using json = nlohmann::json;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

class Reader {
public:
    explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(i)]))
                 << (8 * i);
        }
        pos_ += 4;
        return v;
    }

    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(i)]))
                 << (8 * i);
        }
        pos_ += 8;
        return v;
    }

    float f32() {
        const std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }

    std::string blob(std::size_t n) {
        need(n);
        std::string out = bytes_.substr(pos_, n);
        pos_ += n;
        return out;
    }

    bool exhausted() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (pos_ + n > bytes_.size()) {
            throw_data("CorruptCheckpoint", "checkpoint file is truncated");
        }
    }

    std::string bytes_;
    std::size_t pos_ = 0;
};

json config_to_json(const ModelConfig& c) {
    return json{{"hidden_dim", c.hidden_dim},
                {"num_hashes", c.num_hashes},
                {"hash_buckets", c.hash_buckets},
                {"downsample_rate", c.downsample_rate},
                {"num_layers", c.num_layers},
                {"num_heads", c.num_heads},
                {"max_len", c.max_len},
                {"label_count", c.label_count},
                {"dropout_p", c.dropout_p}};
}

ModelConfig config_from_json(const json& j) {
    ModelConfig c;
    c.hidden_dim = j.at("hidden_dim").get<int>();
    c.num_hashes = j.at("num_hashes").get<int>();
    c.hash_buckets = j.at("hash_buckets").get<int>();
    c.downsample_rate = j.at("downsample_rate").get<int>();
    c.num_layers = j.at("num_layers").get<int>();
    c.num_heads = j.at("num_heads").get<int>();
    c.max_len = j.at("max_len").get<int>();
    c.label_count = j.at("label_count").get<int>();
    c.dropout_p = j.at("dropout_p").get<double>();
    return c;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    const HashSpec& hs = hash_spec();
    json header;
    header["config"] = config_to_json(ckpt.config);
    header["label_space_digest"] = ckpt.label_space_digest;
    header["best_val_accuracy"] = ckpt.best_val_accuracy;
    header["meta"] = json{{"epochs_seen", ckpt.meta.epochs_seen}, {"seed", ckpt.meta.seed}};
    json hash;
    hash["prime"] = hs.prime;
    hash["mul"] = std::vector<std::uint64_t>(hs.mul.begin(),
                                             hs.mul.begin() + ckpt.config.num_hashes);
    hash["add"] = std::vector<std::uint64_t>(hs.add.begin(),
                                             hs.add.begin() + ckpt.config.num_hashes);
    header["hash"] = hash;
    const std::string header_bytes = header.dump();

    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kVersion);
    put_u64(out, header_bytes.size());
    out += header_bytes;

    std::vector<std::pair<std::string, const Mat<float>*>> tensors;
    visit_tensors(const_cast<Parameters&>(ckpt.params),
                  [&tensors](const std::string& name, Mat<float>& m) {
                      tensors.emplace_back(name, &m);
                  });
    put_u32(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, mat] : tensors) {
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        put_u32(out, static_cast<std::uint32_t>(mat->rows()));
        put_u32(out, static_cast<std::uint32_t>(mat->cols()));
    }
    for (const auto& [name, mat] : tensors) {
        for (Eigen::Index r = 0; r < mat->rows(); ++r) {
            for (Eigen::Index c = 0; c < mat->cols(); ++c) {
                put_f32(out, (*mat)(r, c));
            }
        }
    }

    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw_data("FileWriteError", "cannot write checkpoint " + path.string());
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!file) throw_data("FileWriteError", "short write to " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw_data("FileNotFound", "cannot open checkpoint " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
    Reader reader(std::move(bytes));

    const std::string magic = reader.blob(4);
    if (std::memcmp(magic.data(), kMagic, 4) != 0) {
        throw_data("CorruptCheckpoint", "bad magic bytes; not a checkpoint file");
    }
    const std::uint32_t version = reader.u32();
    if (version != kVersion) {
        throw_data("CorruptCheckpoint", "unsupported checkpoint version " +
                                            std::to_string(version) + " (supported: " +
                                            std::to_string(kVersion) + ")");
    }
    const std::uint64_t header_len = reader.u64();
    json header;
    try {
        header = json::parse(reader.blob(header_len));
    } catch (const json::exception& e) {
        throw_data("CorruptCheckpoint", std::string("bad header JSON: ") + e.what());
    }

    Checkpoint ckpt;
    try {
        ckpt.config = config_from_json(header.at("config"));
        ckpt.label_space_digest = header.at("label_space_digest").get<std::string>();
        ckpt.best_val_accuracy = header.at("best_val_accuracy").get<double>();
        ckpt.meta.epochs_seen = header.at("meta").at("epochs_seen").get<int>();
        ckpt.meta.seed = header.at("meta").at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw_data("CorruptCheckpoint", std::string("incomplete header: ") + e.what());
    }
    ckpt.config.validate();

    // The header records the hash constants the tensors were built with;
    // refuse files minted under a different tokenization.
    const HashSpec& hs = hash_spec();
    if (header.contains("hash")) {
        const auto& hash = header.at("hash");
        if (hash.at("prime").get<std::uint64_t>() != hs.prime) {
            throw_data("CorruptCheckpoint", "checkpoint uses different hash constants");
        }
        const auto mul = hash.at("mul").get<std::vector<std::uint64_t>>();
        const auto add = hash.at("add").get<std::vector<std::uint64_t>>();
        for (std::size_t k = 0; k < mul.size() && k < 16; ++k) {
            if (mul[k] != hs.mul[k] || add[k] != hs.add[k]) {
                throw_data("CorruptCheckpoint", "checkpoint uses different hash constants");
            }
        }
    }

    ckpt.params = init_params<float>(ckpt.config, 0);
    std::map<std::string, Mat<float>*> by_name;
    visit_tensors(ckpt.params, [&by_name](const std::string& name, Mat<float>& m) {
        by_name[name] = &m;
    });

    const std::uint32_t count = reader.u32();
    if (count != by_name.size()) {
        throw_data("CorruptCheckpoint", "tensor count " + std::to_string(count) +
                                            " does not match config (expected " +
                                            std::to_string(by_name.size()) + ")");
    }
    struct Entry {
        Mat<float>* mat;
        std::uint32_t rows, cols;
    };
    std::vector<Entry> entries;
    entries.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = reader.u32();
        const std::string name = reader.blob(name_len);
        const std::uint32_t rows = reader.u32();
        const std::uint32_t cols = reader.u32();
        auto it = by_name.find(name);
        if (it == by_name.end()) {
            throw_data("CorruptCheckpoint", "unexpected tensor '" + name + "'");
        }
        if (static_cast<Eigen::Index>(rows) != it->second->rows() ||
            static_cast<Eigen::Index>(cols) != it->second->cols()) {
            throw_data("CorruptCheckpoint", "tensor '" + name + "' has shape " +
                                                std::to_string(rows) + "x" + std::to_string(cols) +
                                                ", config implies " +
                                                std::to_string(it->second->rows()) + "x" +
                                                std::to_string(it->second->cols()));
        }
        entries.push_back({it->second, rows, cols});
    }
    for (const Entry& e : entries) {
        for (std::uint32_t r = 0; r < e.rows; ++r) {
            for (std::uint32_t c = 0; c < e.cols; ++c) {
                (*e.mat)(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = reader.f32();
            }
        }
    }
    if (!reader.exhausted()) {
        throw_data("CorruptCheckpoint", "trailing bytes after tensor payloads");
    }
    return ckpt;
}

}  // namespace occ
