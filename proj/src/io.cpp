#include "viewpaint/io.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>

#include "viewpaint/error.hpp"

namespace viewpaint {

namespace {

[[noreturn]] void fail_at(const std::string& what, std::size_t offset) {
    throw FormatError(what + " at byte " + std::to_string(offset));
}

void put_u32le(std::vector<unsigned char>& out, std::uint32_t v) {
    out.push_back(static_cast<unsigned char>(v & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 16) & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 24) & 0xff));
}

std::uint32_t get_u32le(const std::vector<unsigned char>& b, std::size_t pos) {
    return static_cast<std::uint32_t>(b[pos]) | (static_cast<std::uint32_t>(b[pos + 1]) << 8) |
           (static_cast<std::uint32_t>(b[pos + 2]) << 16) |
           (static_cast<std::uint32_t>(b[pos + 3]) << 24);
}

void put_u32be(std::vector<unsigned char>& out, std::uint32_t v) {
    out.push_back(static_cast<unsigned char>((v >> 24) & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 16) & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
    out.push_back(static_cast<unsigned char>(v & 0xff));
}

std::uint32_t get_u32be(const std::vector<unsigned char>& b, std::size_t pos) {
    return (static_cast<std::uint32_t>(b[pos]) << 24) |
           (static_cast<std::uint32_t>(b[pos + 1]) << 16) |
           (static_cast<std::uint32_t>(b[pos + 2]) << 8) | static_cast<std::uint32_t>(b[pos + 3]);
}

}  // namespace

std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open file for reading: " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                     std::istreambuf_iterator<char>());
    return bytes;
}

void write_file(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw FormatError("cannot open file for writing: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw FormatError("write failed: " + path);
}

// ---- ICDF ----------------------------------------------------------------

std::vector<unsigned char> encode_icdf(const Tensor& t) {
    if (!t.defined()) throw ContractError("encode_icdf: undefined tensor");
    std::vector<unsigned char> out = {'I', 'C', 'D', 'F'};
    out.push_back(static_cast<unsigned char>(t.rank()));
    for (int e : t.shape()) put_u32le(out, static_cast<std::uint32_t>(e));
    const std::size_t payload = t.size() * sizeof(float);
    const std::size_t head = out.size();
    out.resize(head + payload);
    std::memcpy(out.data() + head, t.data().data(), payload);
    return out;
}

Tensor decode_icdf(const std::vector<unsigned char>& b) {
    if (b.size() < 5 || b[0] != 'I' || b[1] != 'C' || b[2] != 'D' || b[3] != 'F')
        fail_at("ICDF: bad magic", 0);
    const int rank = b[4];
    std::size_t pos = 5;
    if (b.size() < pos + 4u * static_cast<std::size_t>(rank))
        fail_at("ICDF: truncated extent list", b.size());
    Shape shape(static_cast<std::size_t>(rank));
    std::size_t numel = 1;
    for (int d = 0; d < rank; ++d) {
        const std::uint32_t e = get_u32le(b, pos);
        if (e == 0) fail_at("ICDF: zero extent", pos);
        shape[static_cast<std::size_t>(d)] = static_cast<int>(e);
        numel *= e;
        pos += 4;
    }
    if (b.size() != pos + numel * sizeof(float))
        fail_at("ICDF: payload size mismatch (want " + std::to_string(numel * sizeof(float)) +
                    " bytes)",
                pos);
    std::vector<float> data(numel);
    std::memcpy(data.data(), b.data() + pos, numel * sizeof(float));
    return Tensor::from_data(std::move(shape), std::move(data));
}

void save_icdf(const std::string& path, const Tensor& t) { write_file(path, encode_icdf(t)); }

Tensor load_icdf(const std::string& path) {
    try {
        return decode_icdf(read_file(path));
    } catch (const FormatError& e) {
        throw FormatError(std::string(e.what()) + " [" + path + "]");
    }
}

// ---- PNG -----------------------------------------------------------------

namespace {

constexpr unsigned char kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

void put_chunk(std::vector<unsigned char>& out, const char type[4],
               const std::vector<unsigned char>& data) {
    put_u32be(out, static_cast<std::uint32_t>(data.size()));
    const std::size_t type_pos = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    const uLong crc =
        crc32(0L, out.data() + type_pos, static_cast<uInt>(4 + data.size()));
    put_u32be(out, static_cast<std::uint32_t>(crc));
}

int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

}  // namespace

std::vector<unsigned char> encode_png(const Tensor& img) {
    if (!img.defined() || img.rank() != 3)
        throw DimensionError("encode_png: expected [C,H,W] tensor");
    const int c = img.shape()[0], h = img.shape()[1], w = img.shape()[2];
    if (c != 1 && c != 3)
        throw DimensionError("encode_png: channel count must be 1 or 3, got " +
                             std::to_string(c));
    // interleave planes into filtered scanlines (filter type 0 throughout)
    const std::size_t row_bytes = static_cast<std::size_t>(w) * static_cast<std::size_t>(c);
    std::vector<unsigned char> raw(static_cast<std::size_t>(h) * (1 + row_bytes));
    auto px = img.data();
    const std::size_t plane = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
    std::size_t o = 0;
    for (int y = 0; y < h; ++y) {
        raw[o++] = 0;
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < c; ++ch) {
                float v = px[static_cast<std::size_t>(ch) * plane +
                             static_cast<std::size_t>(y) * w + x];
                v = std::min(1.0f, std::max(0.0f, v));
                raw[o++] = static_cast<unsigned char>(std::lround(v * 255.0f));
            }
    }
    uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
    std::vector<unsigned char> comp(comp_len);
    if (compress2(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw FormatError("encode_png: deflate failed");
    comp.resize(comp_len);

    std::vector<unsigned char> out(kPngSig, kPngSig + 8);
    std::vector<unsigned char> ihdr;
    put_u32be(ihdr, static_cast<std::uint32_t>(w));
    put_u32be(ihdr, static_cast<std::uint32_t>(h));
    ihdr.push_back(8);                       // bit depth
    ihdr.push_back(c == 1 ? 0 : 2);          // color type: gray / truecolor
    ihdr.push_back(0);                       // compression
    ihdr.push_back(0);                       // filter method
    ihdr.push_back(0);                       // no interlace
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT", comp);
    put_chunk(out, "IEND", {});
    return out;
}

Tensor decode_png(const std::vector<unsigned char>& b) {
    if (b.size() < 8 || std::memcmp(b.data(), kPngSig, 8) != 0)
        fail_at("PNG: bad signature", 0);
    std::size_t pos = 8;
    int w = 0, h = 0, channels = 0;
    bool seen_ihdr = false, seen_iend = false;
    std::vector<unsigned char> idat;
    while (!seen_iend) {
        if (pos + 8 > b.size()) fail_at("PNG: truncated chunk header", pos);
        const std::uint32_t len = get_u32be(b, pos);
        if (pos + 12 + static_cast<std::size_t>(len) > b.size())
            fail_at("PNG: truncated chunk body", pos);
        const char* type = reinterpret_cast<const char*>(b.data() + pos + 4);
        const uLong crc_want = get_u32be(b, pos + 8 + len);
        const uLong crc_got = crc32(0L, b.data() + pos + 4, static_cast<uInt>(4 + len));
        if (crc_want != crc_got) fail_at("PNG: chunk CRC mismatch", pos + 8 + len);
        const unsigned char* data = b.data() + pos + 8;
        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) fail_at("PNG: IHDR length " + std::to_string(len), pos);
            w = static_cast<int>(get_u32be(b, pos + 8));
            h = static_cast<int>(get_u32be(b, pos + 12));
            const int depth = data[8], color = data[9], interlace = data[12];
            if (depth != 8) fail_at("PNG: unsupported bit depth " + std::to_string(depth), pos + 16);
            if (color == 0)
                channels = 1;
            else if (color == 2)
                channels = 3;
            else
                fail_at("PNG: unsupported color type " + std::to_string(color), pos + 17);
            if (interlace != 0) fail_at("PNG: interlacing unsupported", pos + 20);
            if (w <= 0 || h <= 0) fail_at("PNG: bad dimensions", pos + 8);
            seen_ihdr = true;
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            if (!seen_ihdr) fail_at("PNG: IDAT before IHDR", pos);
            idat.insert(idat.end(), data, data + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            seen_iend = true;
        } else if ((type[0] & 0x20) == 0) {
            fail_at("PNG: unsupported critical chunk " + std::string(type, type + 4), pos);
        }
        pos += 12 + len;
    }
    if (!seen_ihdr) fail_at("PNG: missing IHDR", pos);
    const std::size_t row_bytes =
        static_cast<std::size_t>(w) * static_cast<std::size_t>(channels);
    const std::size_t raw_len = static_cast<std::size_t>(h) * (1 + row_bytes);
    std::vector<unsigned char> raw(raw_len);
    uLongf got = static_cast<uLongf>(raw_len);
    const int zr = uncompress(raw.data(), &got, idat.data(), static_cast<uLong>(idat.size()));
    if (zr != Z_OK || got != raw_len) fail_at("PNG: inflate failed or size mismatch", pos);

    // undo scanline filters in place (bytes-per-pixel = channel count at depth 8)
    const int bpp = channels;
    std::vector<unsigned char> prior(row_bytes, 0);
    std::vector<float> pix(static_cast<std::size_t>(channels) * h * w);
    const std::size_t plane = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
    for (int y = 0; y < h; ++y) {
        const std::size_t base = static_cast<std::size_t>(y) * (1 + row_bytes);
        const int filt = raw[base];
        unsigned char* row = raw.data() + base + 1;
        switch (filt) {
            case 0:
                break;
            case 1:  // Sub
                for (std::size_t i = static_cast<std::size_t>(bpp); i < row_bytes; ++i)
                    row[i] = static_cast<unsigned char>(row[i] + row[i - bpp]);
                break;
            case 2:  // Up
                for (std::size_t i = 0; i < row_bytes; ++i)
                    row[i] = static_cast<unsigned char>(row[i] + prior[i]);
                break;
            case 3:  // Average
                for (std::size_t i = 0; i < row_bytes; ++i) {
                    const int left = i >= static_cast<std::size_t>(bpp) ? row[i - bpp] : 0;
                    row[i] = static_cast<unsigned char>(row[i] + ((left + prior[i]) >> 1));
                }
                break;
            case 4:  // Paeth
                for (std::size_t i = 0; i < row_bytes; ++i) {
                    const int left = i >= static_cast<std::size_t>(bpp) ? row[i - bpp] : 0;
                    const int ul = i >= static_cast<std::size_t>(bpp) ? prior[i - bpp] : 0;
                    row[i] = static_cast<unsigned char>(row[i] + paeth(left, prior[i], ul));
                }
                break;
            default:
                fail_at("PNG: bad filter type " + std::to_string(filt), base);
        }
        std::memcpy(prior.data(), row, row_bytes);
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < channels; ++ch)
                pix[static_cast<std::size_t>(ch) * plane + static_cast<std::size_t>(y) * w + x] =
                    static_cast<float>(row[static_cast<std::size_t>(x) * channels + ch]) / 255.0f;
    }
    return Tensor::from_data({channels, h, w}, std::move(pix));
}

void save_png(const std::string& path, const Tensor& img) { write_file(path, encode_png(img)); }

Tensor load_png(const std::string& path) {
    try {
        return decode_png(read_file(path));
    } catch (const FormatError& e) {
        throw FormatError(std::string(e.what()) + " [" + path + "]");
    }
}

}  // namespace viewpaint
