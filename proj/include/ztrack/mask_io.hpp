#pragma once

#include "ztrack/mask.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#ifdef ZTRACK_WITH_PNG
#include <png.h>
#endif

namespace ztrack {

// ---------------------------------------------------------------------------
// PGM (P5, 8-bit). Gray > 127 reads as foreground.
// ---------------------------------------------------------------------------

inline void write_pgm(const FrameMask& mask, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_pgm: cannot open " + path);
    f << "P5\n" << mask.width << " " << mask.height << "\n255\n";
    std::vector<std::uint8_t> row(static_cast<std::size_t>(mask.width));
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            row[static_cast<std::size_t>(x)] = mask.at(x, y) ? 255 : 0;
        }
        f.write(reinterpret_cast<const char*>(row.data()), mask.width);
    }
    if (!f) throw std::runtime_error("write_pgm: write failed for " + path);
}

namespace io_detail {

inline int pnm_next_int(std::istream& in, const std::string& path) {
    // Skip whitespace and '#' comment lines.
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (!std::isspace(c)) {
            break;
        }
        c = in.get();
    }
    if (c == EOF) throw std::runtime_error("corrupted PGM header: " + path);
    int value = 0;
    bool any = false;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        any = true;
        c = in.get();
    }
    if (!any) throw std::runtime_error("corrupted PGM header: " + path);
    return value;
}

} // namespace io_detail

inline FrameMask read_pgm(const std::string& path, int threshold = 127, long frame_index = 0) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_pgm: cannot open " + path);
    char m0 = 0, m1 = 0;
    f.get(m0);
    f.get(m1);
    if (m0 != 'P' || m1 != '5') throw std::runtime_error("read_pgm: not a P5 PGM: " + path);
    const int w = io_detail::pnm_next_int(f, path);
    const int h = io_detail::pnm_next_int(f, path);
    const int maxval = io_detail::pnm_next_int(f, path);
    if (maxval <= 0 || maxval > 255) throw std::runtime_error("read_pgm: unsupported maxval: " + path);
    std::vector<std::uint8_t> gray(static_cast<std::size_t>(w) * h);
    f.read(reinterpret_cast<char*>(gray.data()), static_cast<std::streamsize>(gray.size()));
    if (f.gcount() != static_cast<std::streamsize>(gray.size())) {
        throw std::runtime_error("read_pgm: truncated pixel data: " + path);
    }
    return mask_from_gray(gray, w, h, threshold, frame_index);
}

// ---------------------------------------------------------------------------
// PNG (8-bit grayscale), available when built with libpng.
// ---------------------------------------------------------------------------

#ifdef ZTRACK_WITH_PNG
inline void write_png(const FrameMask& mask, const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw std::runtime_error("write_png: cannot open " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        if (png) png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw std::runtime_error("write_png: libpng failure for " + path);
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(mask.width),
                 static_cast<png_uint_32>(mask.height), 8, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_byte> row(static_cast<std::size_t>(mask.width));
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            row[static_cast<std::size_t>(x)] = mask.at(x, y) ? 255 : 0;
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

inline FrameMask read_png(const std::string& path, int threshold = 127, long frame_index = 0) {
    FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw std::runtime_error("read_png: cannot open " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        if (png) png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw std::runtime_error("read_png: libpng failure for " + path);
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    if (png_get_color_type(png, info) & PNG_COLOR_MASK_COLOR) png_set_rgb_to_gray(png, 1, -1, -1);
    png_read_update_info(png, info);
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    std::vector<std::uint8_t> gray(static_cast<std::size_t>(w) * h);
    std::vector<png_bytep> rows(static_cast<std::size_t>(h));
    for (int y = 0; y < h; ++y) rows[static_cast<std::size_t>(y)] = gray.data() + static_cast<std::size_t>(y) * w;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    return mask_from_gray(gray, w, h, threshold, frame_index);
}
#endif

// ---------------------------------------------------------------------------
// FMSK: raw packed-binary sequence. 16-byte header (magic "FMSK", u32 width,
// u32 height, u32 frame count, little-endian) followed by frames in order.
// Each frame is row-major, bit-packed 8 pixels per byte, MSB first, rows
// padded to whole bytes.
// ---------------------------------------------------------------------------

namespace io_detail {

inline std::size_t fmsk_row_bytes(int width) { return (static_cast<std::size_t>(width) + 7) / 8; }

inline void put_u32le(std::ostream& out, std::uint32_t v) {
    char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                 static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(b, 4);
}

inline std::uint32_t get_u32le(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

} // namespace io_detail

class FmskWriter {
public:
    FmskWriter(const std::string& path, int width, int height)
        : out_(path, std::ios::binary), path_(path), width_(width), height_(height) {
        if (!out_) throw std::runtime_error("FmskWriter: cannot open " + path);
        out_.write("FMSK", 4);
        io_detail::put_u32le(out_, static_cast<std::uint32_t>(width));
        io_detail::put_u32le(out_, static_cast<std::uint32_t>(height));
        io_detail::put_u32le(out_, 0); // frame count patched on close
    }

    void write(const FrameMask& mask) {
        if (mask.width != width_ || mask.height != height_) {
            throw std::runtime_error("FmskWriter: frame dimensions changed mid-sequence");
        }
        const std::size_t rb = io_detail::fmsk_row_bytes(width_);
        std::vector<std::uint8_t> row(rb);
        for (int y = 0; y < height_; ++y) {
            std::fill(row.begin(), row.end(), 0);
            for (int x = 0; x < width_; ++x) {
                if (mask.at(x, y)) row[static_cast<std::size_t>(x) >> 3] |= 0x80u >> (x & 7);
            }
            out_.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(rb));
        }
        ++count_;
    }

    void close() {
        if (!out_.is_open()) return;
        out_.seekp(12);
        io_detail::put_u32le(out_, static_cast<std::uint32_t>(count_));
        out_.close();
    }

    ~FmskWriter() { close(); }

private:
    std::ofstream out_;
    std::string path_;
    int width_;
    int height_;
    long count_ = 0;
};

class FmskReader {
public:
    explicit FmskReader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
        if (!in_) throw std::runtime_error("FmskReader: cannot open " + path);
        char magic[4];
        in_.read(magic, 4);
        if (in_.gcount() != 4 || std::memcmp(magic, "FMSK", 4) != 0) {
            throw std::runtime_error("FmskReader: bad magic in " + path);
        }
        width_ = static_cast<int>(io_detail::get_u32le(in_));
        height_ = static_cast<int>(io_detail::get_u32le(in_));
        count_ = static_cast<long>(io_detail::get_u32le(in_));
        if (!in_ || width_ <= 0 || height_ <= 0) {
            throw std::runtime_error("FmskReader: corrupted header in " + path);
        }
    }

    int width() const { return width_; }
    int height() const { return height_; }
    long frame_count() const { return count_; }

    FrameMask read(long frame_index) {
        FrameMask mask(width_, height_, frame_index);
        const std::size_t rb = io_detail::fmsk_row_bytes(width_);
        in_.seekg(16 + static_cast<std::streamoff>(frame_index) *
                           static_cast<std::streamoff>(rb) * height_);
        std::vector<std::uint8_t> row(rb);
        for (int y = 0; y < height_; ++y) {
            in_.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(rb));
            if (in_.gcount() != static_cast<std::streamsize>(rb)) {
                throw std::runtime_error("FmskReader: truncated frame in " + path_);
            }
            for (int x = 0; x < width_; ++x) {
                if (row[static_cast<std::size_t>(x) >> 3] & (0x80u >> (x & 7))) {
                    mask.set(x, y, true);
                }
            }
        }
        return mask;
    }

private:
    std::ifstream in_;
    std::string path_;
    int width_ = 0;
    int height_ = 0;
    long count_ = 0;
};

// ---------------------------------------------------------------------------
// Frame-sequence abstraction: a directory of frame_%06d.pgm / .png files, or
// one .fmsk file.
// ---------------------------------------------------------------------------

inline std::string frame_file_name(long index, const std::string& ext) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%06ld.%s", index, ext.c_str());
    return buf;
}

class FrameSequenceReader {
public:
    explicit FrameSequenceReader(const std::string& path, int threshold = 127)
        : threshold_(threshold) {
        namespace fs = std::filesystem;
        if (fs::is_directory(path)) {
            dir_ = path;
            for (long i = 0;; ++i) {
                if (fs::exists(fs::path(dir_) / frame_file_name(i, "pgm"))) {
                    ext_ = "pgm";
                } else if (fs::exists(fs::path(dir_) / frame_file_name(i, "png"))) {
                    ext_ = "png";
                } else {
                    count_ = i;
                    break;
                }
            }
            if (count_ == 0) {
                throw std::runtime_error("FrameSequenceReader: no frame_000000.{pgm,png} in " + path);
            }
        } else {
            fmsk_ = std::make_unique<FmskReader>(path);
            count_ = fmsk_->frame_count();
        }
    }

    long frame_count() const { return count_; }

    FrameMask read(long index) {
        if (fmsk_) return fmsk_->read(index);
        namespace fs = std::filesystem;
        const std::string p = (fs::path(dir_) / frame_file_name(index, ext_)).string();
        if (!fs::exists(p)) {
            throw std::runtime_error("FrameSequenceReader: missing frame file " + p);
        }
        if (ext_ == "pgm") return read_pgm(p, threshold_, index);
#ifdef ZTRACK_WITH_PNG
        return read_png(p, threshold_, index);
#else
        throw std::runtime_error("FrameSequenceReader: PNG support not built in");
#endif
    }

private:
    std::string dir_;
    std::string ext_ = "pgm";
    std::unique_ptr<FmskReader> fmsk_;
    long count_ = 0;
    int threshold_;
};

class FrameSequenceWriter {
public:
    /// format: "pgm", "png", or "fmsk"
    FrameSequenceWriter(const std::string& out_path, const std::string& format, int width,
                        int height)
        : format_(format), path_(out_path), width_(width), height_(height) {
        namespace fs = std::filesystem;
        if (format_ == "fmsk") {
            fmsk_ = std::make_unique<FmskWriter>(out_path, width, height);
        } else if (format_ == "pgm" || format_ == "png") {
            fs::create_directories(out_path);
        } else {
            throw std::invalid_argument("FrameSequenceWriter: unknown format " + format);
        }
    }

    void write(const FrameMask& mask) {
        namespace fs = std::filesystem;
        if (fmsk_) {
            fmsk_->write(mask);
            return;
        }
        const std::string p = (fs::path(path_) / frame_file_name(next_, format_)).string();
        if (format_ == "pgm") {
            write_pgm(mask, p);
        } else {
#ifdef ZTRACK_WITH_PNG
            write_png(mask, p);
#else
            throw std::runtime_error("FrameSequenceWriter: PNG support not built in");
#endif
        }
        ++next_;
    }

    void close() {
        if (fmsk_) fmsk_->close();
    }

private:
    std::string format_;
    std::string path_;
    int width_;
    int height_;
    std::unique_ptr<FmskWriter> fmsk_;
    long next_ = 0;
};

} // namespace ztrack
