#pragma once

#include <bit>
#include <cstdio>
#include <cstring>
#include <map>
#include <string>

#include "lfe/tensor.hpp"

namespace lfe {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

// Named, shaped parameter tensors. Names are unique, shapes immutable after
// creation. Reads are safe to share; mutation needs exclusive access.
template <typename T>
class ParamStore {
public:
    struct Entry {
        Tensor<T> value;
        bool trainable = true;
    };

    Tensor<T>& add(const std::string& name, Tensor<T> value, bool trainable = true) {
        auto [it, inserted] = entries_.emplace(name, Entry{std::move(value), trainable});
        if (!inserted) throw ParamError("ParamStore: duplicate parameter name: " + name);
        return it->second.value;
    }

    bool contains(const std::string& name) const { return entries_.count(name) != 0; }

    Entry& entry(const std::string& name) {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw ParamError("ParamStore: unknown parameter: " + name);
        return it->second;
    }
    const Entry& entry(const std::string& name) const {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw ParamError("ParamStore: unknown parameter: " + name);
        return it->second;
    }

    Tensor<T>& value(const std::string& name) { return entry(name).value; }
    const Tensor<T>& value(const std::string& name) const { return entry(name).value; }

    void set_value(const std::string& name, Tensor<T> v) {
        Entry& e = entry(name);
        check_same_shape(e.value, v, ("ParamStore::set_value " + name).c_str());
        e.value = std::move(v);
    }

    long long total_count() const {
        long long n = 0;
        for (const auto& [name, e] : entries_) n += e.value.numel();
        return n;
    }

    auto begin() { return entries_.begin(); }
    auto end() { return entries_.end(); }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }
    size_t size() const { return entries_.size(); }

private:
    std::map<std::string, Entry> entries_;  // ordered: deterministic iteration
};

// ----- checkpoint container -----
// Layout: magic "LFECKPT\n", u32 version, u64 entry count, then per entry:
// u32 name length, name bytes, u8 dtype tag (0 = f64, 1 = f32), u8 trainable,
// u32 rank, i64 dims, raw little-endian values. Round trips are bit-exact
// within one dtype.

namespace detail {

inline constexpr char kCkptMagic[8] = {'L', 'F', 'E', 'C', 'K', 'P', 'T', '\n'};
inline constexpr uint32_t kCkptVersion = 1;

template <typename T>
constexpr uint8_t dtype_tag() {
    if constexpr (std::is_same_v<T, double>) return 0;
    else return 1;
}

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};

inline void write_raw(std::FILE* f, const void* p, size_t n) {
    if (std::fwrite(p, 1, n, f) != n) throw IoError("checkpoint: short write");
}

inline void read_raw(std::FILE* f, void* p, size_t n) {
    if (std::fread(p, 1, n, f) != n) throw IoError("checkpoint: short read / truncated file");
}

}  // namespace detail

template <typename T>
void save_checkpoint(const ParamStore<T>& ps, const std::string& path) {
    std::unique_ptr<std::FILE, detail::FileCloser> f(std::fopen(path.c_str(), "wb"));
    if (!f) throw IoError("checkpoint: cannot open for writing: " + path);
    detail::write_raw(f.get(), detail::kCkptMagic, 8);
    uint32_t ver = detail::kCkptVersion;
    detail::write_raw(f.get(), &ver, 4);
    uint64_t count = ps.size();
    detail::write_raw(f.get(), &count, 8);
    for (const auto& [name, e] : ps) {
        uint32_t nl = static_cast<uint32_t>(name.size());
        detail::write_raw(f.get(), &nl, 4);
        detail::write_raw(f.get(), name.data(), nl);
        uint8_t tag = detail::dtype_tag<T>();
        detail::write_raw(f.get(), &tag, 1);
        uint8_t tr = e.trainable ? 1 : 0;
        detail::write_raw(f.get(), &tr, 1);
        uint32_t rank = static_cast<uint32_t>(e.value.rank());
        detail::write_raw(f.get(), &rank, 4);
        for (int i = 0; i < e.value.rank(); ++i) {
            int64_t d = e.value.dim(i);
            detail::write_raw(f.get(), &d, 8);
        }
        detail::write_raw(f.get(), e.value.data(), sizeof(T) * static_cast<size_t>(e.value.numel()));
    }
    if (std::fflush(f.get()) != 0) throw IoError("checkpoint: flush failed: " + path);
}

template <typename T>
ParamStore<T> load_checkpoint(const std::string& path) {
    std::unique_ptr<std::FILE, detail::FileCloser> f(std::fopen(path.c_str(), "rb"));
    if (!f) throw IoError("checkpoint: cannot open for reading: " + path);
    char magic[8];
    detail::read_raw(f.get(), magic, 8);
    if (std::memcmp(magic, detail::kCkptMagic, 8) != 0)
        throw VersionError("checkpoint: bad magic (not a checkpoint file): " + path);
    uint32_t ver = 0;
    detail::read_raw(f.get(), &ver, 4);
    if (ver != detail::kCkptVersion)
        throw VersionError("checkpoint: unsupported format version " + std::to_string(ver));
    uint64_t count = 0;
    detail::read_raw(f.get(), &count, 8);
    ParamStore<T> ps;
    for (uint64_t k = 0; k < count; ++k) {
        uint32_t nl = 0;
        detail::read_raw(f.get(), &nl, 4);
        std::string name(nl, '\0');
        detail::read_raw(f.get(), name.data(), nl);
        uint8_t tag = 0, tr = 0;
        detail::read_raw(f.get(), &tag, 1);
        detail::read_raw(f.get(), &tr, 1);
        uint32_t rank = 0;
        detail::read_raw(f.get(), &rank, 4);
        if (rank > 8) throw IoError("checkpoint: implausible tensor rank");
        std::vector<int> dims(rank);
        for (uint32_t i = 0; i < rank; ++i) {
            int64_t d = 0;
            detail::read_raw(f.get(), &d, 8);
            if (d <= 0 || d > (1 << 24)) throw IoError("checkpoint: implausible dimension");
            dims[i] = static_cast<int>(d);
        }
        Tensor<T> t(dims);
        if (tag == detail::dtype_tag<T>()) {
            detail::read_raw(f.get(), t.data(), sizeof(T) * static_cast<size_t>(t.numel()));
        } else if (tag == 0) {
            std::vector<double> buf(static_cast<size_t>(t.numel()));
            detail::read_raw(f.get(), buf.data(), 8 * buf.size());
            for (long long i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(buf[static_cast<size_t>(i)]);
        } else if (tag == 1) {
            std::vector<float> buf(static_cast<size_t>(t.numel()));
            detail::read_raw(f.get(), buf.data(), 4 * buf.size());
            for (long long i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(buf[static_cast<size_t>(i)]);
        } else {
            throw VersionError("checkpoint: unknown dtype tag");
        }
        ps.add(name, std::move(t), tr != 0);
    }
    return ps;
}

}  // namespace lfe
