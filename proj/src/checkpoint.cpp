#include "hecta/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace hecta {

namespace {

constexpr char kMagic[8] = {'H', 'E', 'C', 'T', 'A', 'C', 'K', 'P'};

template <typename T>
void put(std::string& out, T value) {
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out.append(buf, sizeof(T));
}

void put_string(std::string& out, const std::string& s) {
    put<std::uint64_t>(out, s.size());
    out += s;
}

class Reader {
public:
    explicit Reader(const std::string& bytes) : bytes_(bytes) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        T value;
        std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return value;
    }

    std::string get_string() {
        const auto n = get<std::uint64_t>();
        need(n);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    void get_raw(void* dst, std::size_t n) {
        need(n);
        std::memcpy(dst, bytes_.data() + pos_, n);
        pos_ += n;
    }

    bool at_end() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (n > bytes_.size() - pos_) throw CheckpointError("checkpoint truncated");
    }
    const std::string& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckp) {
    std::string out(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint64_t>(out, ckp.metadata.size());
    for (const auto& [k, v] : ckp.metadata) {
        put_string(out, k);
        put_string(out, v);
    }
    put<std::uint64_t>(out, ckp.params.size());
    for (const auto& [name, t] : ckp.params) {
        put_string(out, name);
        put<std::uint64_t>(out, t.shape.size());
        for (auto d : t.shape) put<std::int64_t>(out, d);
        out.append(reinterpret_cast<const char*>(t.data.data()), t.data.size() * sizeof(double));
    }
    return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
    if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
        throw CheckpointError("not a checkpoint file");
    Reader in(bytes);
    char magic[sizeof kMagic];
    in.get_raw(magic, sizeof magic);
    const auto version = in.get<std::uint32_t>();
    if (version != kCheckpointVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    Checkpoint ckp;
    const auto n_meta = in.get<std::uint64_t>();
    for (std::uint64_t i = 0; i < n_meta; ++i) {
        std::string k = in.get_string();
        ckp.metadata[k] = in.get_string();
    }
    const auto n_params = in.get<std::uint64_t>();
    for (std::uint64_t i = 0; i < n_params; ++i) {
        const std::string name = in.get_string();
        const auto ndim = in.get<std::uint64_t>();
        if (ndim > 8) throw CheckpointError("implausible rank for '" + name + "'");
        std::vector<nn::Index> shape(ndim);
        for (auto& d : shape) {
            d = in.get<std::int64_t>();
            if (d < 0) throw CheckpointError("negative dimension for '" + name + "'");
        }
        auto& t = ckp.params.add(name, shape);
        in.get_raw(t.data.data(), t.data.size() * sizeof(double));
    }
    if (!in.at_end()) throw CheckpointError("trailing bytes after checkpoint");
    return ckp;
}

void save_checkpoint(const Checkpoint& ckp, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot write " + path);
    const std::string bytes = serialize_checkpoint(ckp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("failed writing " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return deserialize_checkpoint(ss.str());
}

void merge_prefixed(Params& dst, const Params& src, const std::string& prefix) {
    for (const auto& [name, t] : src) dst.add(prefix + "/" + name, t.shape).data = t.data;
}

Params extract_prefixed(const Params& src, const std::string& prefix) {
    Params out;
    const std::string head = prefix + "/";
    for (const auto& [name, t] : src)
        if (name.rfind(head, 0) == 0) out.add(name.substr(head.size()), t.shape).data = t.data;
    return out;
}

}  // namespace hecta
