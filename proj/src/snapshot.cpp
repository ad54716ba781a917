#include "nsavg/snapshot.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <stdexcept>
#include <vector>

namespace nsavg {

static_assert(std::endian::native == std::endian::little,
              "NSEF writer assumes a little-endian host");

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f != nullptr) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void put_u32(std::vector<unsigned char>& buf, uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

uint32_t get_u32(const unsigned char* p) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[i]) << (8 * i);
    return v;
}

}  // namespace

void write_snapshot(const std::string& path, const std::vector<SpectralField>& fields) {
    if (fields.empty()) throw std::invalid_argument("snapshot requires at least one field");
    const auto& space = fields.front().space();
    for (const auto& f : fields) {
        if (f.space() != space) throw std::invalid_argument("snapshot fields on mixed spaces");
    }
    const int n = space->size();

    std::vector<unsigned char> buf;
    buf.reserve(16 + fields.size() * static_cast<size_t>(n) * n * 32);
    buf.insert(buf.end(), {'N', 'S', 'E', 'F'});
    put_u32(buf, kSnapshotVersion);
    put_u32(buf, static_cast<uint32_t>(n));
    put_u32(buf, static_cast<uint32_t>(fields.size()));

    for (const auto& f : fields) {
        for (int i1 = 0; i1 < n; ++i1) {
            for (int i2 = 0; i2 < n; ++i2) {
                for (int c = 0; c < 2; ++c) {
                    const Complex z = f.component(c)(i1, i2);
                    const double re = z.real(), im = z.imag();
                    unsigned char raw[16];
                    std::memcpy(raw, &re, 8);
                    std::memcpy(raw + 8, &im, 8);
                    buf.insert(buf.end(), raw, raw + 16);
                }
            }
        }
    }

    // Write-then-rename so partial files never appear under the final name.
    const std::filesystem::path target(path);
    if (target.has_parent_path()) {
        std::filesystem::create_directories(target.parent_path());
    }
    const std::string tmp = path + ".tmp";
    {
        FilePtr f(std::fopen(tmp.c_str(), "wb"));
        if (!f) throw std::runtime_error("cannot open " + tmp + " for writing");
        if (std::fwrite(buf.data(), 1, buf.size(), f.get()) != buf.size()) {
            throw std::runtime_error("short write to " + tmp);
        }
    }
    std::filesystem::rename(tmp, path);
}

std::vector<SpectralField> read_snapshot(const std::string& path, SpacePtr space) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw std::runtime_error("cannot open snapshot " + path);
    std::fseek(f.get(), 0, SEEK_END);
    const long size = std::ftell(f.get());
    std::fseek(f.get(), 0, SEEK_SET);
    if (size < 16) throw std::runtime_error("snapshot " + path + " truncated");
    std::vector<unsigned char> buf(static_cast<size_t>(size));
    if (std::fread(buf.data(), 1, buf.size(), f.get()) != buf.size()) {
        throw std::runtime_error("short read from " + path);
    }

    if (std::memcmp(buf.data(), "NSEF", 4) != 0) {
        throw std::runtime_error("snapshot " + path + ": bad magic");
    }
    const uint32_t version = get_u32(buf.data() + 4);
    const uint32_t n = get_u32(buf.data() + 8);
    const uint32_t count = get_u32(buf.data() + 12);
    if (version != kSnapshotVersion) {
        throw std::runtime_error("snapshot " + path + ": unsupported version");
    }
    if (space != nullptr && static_cast<uint32_t>(space->size()) != n) {
        throw std::runtime_error("snapshot " + path + ": grid size mismatch");
    }
    const size_t need = 16 + static_cast<size_t>(count) * n * n * 32;
    if (buf.size() < need) throw std::runtime_error("snapshot " + path + " truncated");

    SpacePtr sp = space != nullptr ? space : make_space(static_cast<int>(n));
    std::vector<SpectralField> fields;
    fields.reserve(count);
    const unsigned char* p = buf.data() + 16;
    for (uint32_t idx = 0; idx < count; ++idx) {
        SpectralField field(sp);
        for (uint32_t i1 = 0; i1 < n; ++i1) {
            for (uint32_t i2 = 0; i2 < n; ++i2) {
                for (int c = 0; c < 2; ++c) {
                    double re, im;
                    std::memcpy(&re, p, 8);
                    std::memcpy(&im, p + 8, 8);
                    p += 16;
                    field.component(c)(i1, i2) = Complex(re, im);
                }
            }
        }
        fields.push_back(std::move(field));
    }
    return fields;
}

}  // namespace nsavg
