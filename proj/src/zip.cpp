#include "hcm/zip.hpp"

#include <cstdint>

#include <zlib.h>

#include "hcm/core.hpp"

namespace hcm {

namespace {

// 1980-01-01 00:00 in DOS format.
constexpr std::uint16_t kDosTime = 0;
constexpr std::uint16_t kDosDate = (0 << 9) | (1 << 5) | 1;

void put16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>(v >> 8));
}

void put32(std::string& out, std::uint32_t v) {
    put16(out, static_cast<std::uint16_t>(v & 0xffff));
    put16(out, static_cast<std::uint16_t>(v >> 16));
}

std::uint32_t get(const std::string& s, std::size_t pos, int bytes) {
    if (pos + static_cast<std::size_t>(bytes) > s.size()) throw Error("zip: truncated archive");
    std::uint32_t v = 0;
    for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[pos + static_cast<std::size_t>(i)]);
    return v;
}

std::uint32_t crc_of(const std::string& data) {
    uLong crc = crc32(0L, Z_NULL, 0);
    std::size_t off = 0;
    while (off < data.size()) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(data.size() - off, 1u << 30));
        crc = crc32(crc, reinterpret_cast<const Bytef*>(data.data() + off), chunk);
        off += chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::string make_stored_zip(const std::map<std::string, std::string>& files) {
    std::string out, central;
    for (const auto& [name, data] : files) {
        if (data.size() > 0xffffffffu || name.size() > 0xffff) throw Error("zip: entry too large");
        const std::uint32_t crc = crc_of(data);
        const auto size = static_cast<std::uint32_t>(data.size());
        const auto offset = static_cast<std::uint32_t>(out.size());

        put32(out, 0x04034b50);
        put16(out, 20);
        put16(out, 0);
        put16(out, 0);
        put16(out, kDosTime);
        put16(out, kDosDate);
        put32(out, crc);
        put32(out, size);
        put32(out, size);
        put16(out, static_cast<std::uint16_t>(name.size()));
        put16(out, 0);
        out += name;
        out += data;

        put32(central, 0x02014b50);
        put16(central, 20);
        put16(central, 20);
        put16(central, 0);
        put16(central, 0);
        put16(central, kDosTime);
        put16(central, kDosDate);
        put32(central, crc);
        put32(central, size);
        put32(central, size);
        put16(central, static_cast<std::uint16_t>(name.size()));
        put16(central, 0);
        put16(central, 0);
        put16(central, 0);
        put16(central, 0);
        put32(central, 0);
        put32(central, offset);
        central += name;
    }
    const auto cd_offset = static_cast<std::uint32_t>(out.size());
    const auto cd_size = static_cast<std::uint32_t>(central.size());
    out += central;
    put32(out, 0x06054b50);
    put16(out, 0);
    put16(out, 0);
    put16(out, static_cast<std::uint16_t>(files.size()));
    put16(out, static_cast<std::uint16_t>(files.size()));
    put32(out, cd_size);
    put32(out, cd_offset);
    put16(out, 0);
    return out;
}

std::map<std::string, std::string> read_stored_zip(const std::string& archive) {
    std::map<std::string, std::string> files;
    std::size_t pos = 0;
    while (pos + 4 <= archive.size() && get(archive, pos, 4) == 0x04034b50) {
        if (get(archive, pos + 8, 2) != 0) throw Error("zip: only stored entries are supported");
        const std::uint32_t crc = get(archive, pos + 14, 4);
        const std::uint32_t size = get(archive, pos + 18, 4);
        const std::uint32_t name_len = get(archive, pos + 26, 2);
        const std::uint32_t extra_len = get(archive, pos + 28, 2);
        const std::size_t name_at = pos + 30, data_at = name_at + name_len + extra_len;
        if (data_at + size > archive.size()) throw Error("zip: truncated entry");
        std::string name = archive.substr(name_at, name_len);
        std::string data = archive.substr(data_at, size);
        if (crc_of(data) != crc) throw Error("zip: CRC mismatch in " + name);
        files.emplace(std::move(name), std::move(data));
        pos = data_at + size;
    }
    if (pos + 4 > archive.size() || (get(archive, pos, 4) != 0x02014b50 && get(archive, pos, 4) != 0x06054b50))
        throw Error("zip: malformed archive");
    return files;
}

}  // namespace hcm
