#include "san/image.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace san {

uint8_t float_to_byte(float v) {
  const float c = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
  return static_cast<uint8_t>(std::lround(c * 255.0f));
}

float byte_to_float(uint8_t b) { return static_cast<float>(b) / 255.0f; }

// ---------------------------------------------------------------------------
// CRC32 / Adler32
// ---------------------------------------------------------------------------

uint32_t crc32(const uint8_t* data, size_t size) {
  static uint32_t table[256];
  static bool init = false;
  if (!init) {
    for (uint32_t n = 0; n < 256; ++n) {
      uint32_t c = n;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
      table[n] = c;
    }
    init = true;
  }
  uint32_t c = 0xffffffffu;
  for (size_t i = 0; i < size; ++i) c = table[(c ^ data[i]) & 0xff] ^ (c >> 8);
  return c ^ 0xffffffffu;
}

namespace {

uint32_t adler32(const uint8_t* data, size_t size) {
  uint32_t a = 1, b = 0;
  for (size_t i = 0; i < size; ++i) {
    a = (a + data[i]) % 65521;
    b = (b + a) % 65521;
  }
  return (b << 16) | a;
}

// ---------------------------------------------------------------------------
// Inflate (RFC 1951), after the classic counts/offsets canonical decoder
// ---------------------------------------------------------------------------

struct BitReader {
  const uint8_t* data;
  size_t size;
  size_t pos = 0;
  uint32_t bitbuf = 0;
  int bitcnt = 0;

  int bits(int need) {
    uint32_t val = bitbuf;
    while (bitcnt < need) {
      check(pos < size, "inflate: out of input");
      val |= static_cast<uint32_t>(data[pos++]) << bitcnt;
      bitcnt += 8;
    }
    bitbuf = val >> need;
    bitcnt -= need;
    return static_cast<int>(val & ((1u << need) - 1));
  }

  void align_byte() {
    bitbuf = 0;
    bitcnt = 0;
  }
};

struct Huffman {
  int count[16] = {0};
  std::vector<int> symbols;

  void build(const std::vector<int>& lengths) {
    for (int i = 0; i < 16; ++i) count[i] = 0;
    for (int l : lengths) count[l]++;
    count[0] = 0;
    std::vector<int> offs(16, 0);
    for (int len = 1; len < 16; ++len) offs[len] = offs[len - 1] + count[len - 1];
    symbols.assign(lengths.size(), 0);
    for (size_t sym = 0; sym < lengths.size(); ++sym)
      if (lengths[sym] != 0) symbols[static_cast<size_t>(offs[lengths[sym]]++)] =
          static_cast<int>(sym);
  }

  int decode(BitReader& br) const {
    int code = 0, first = 0, index = 0;
    for (int len = 1; len < 16; ++len) {
      code |= br.bits(1);
      const int n = count[len];
      if (code - first < n) return symbols[static_cast<size_t>(index + (code - first))];
      index += n;
      first += n;
      first <<= 1;
      code <<= 1;
    }
    throw std::runtime_error("inflate: invalid huffman code");
  }
};

const int kLenBase[29] = {3,  4,  5,  6,  7,  8,  9,  10, 11,  13,  15,  17,  19,  23, 27,
                          31, 35, 43, 51, 59, 67, 83, 99, 115, 131, 163, 195, 227, 258};
const int kLenExtra[29] = {0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2,
                           2, 3, 3, 3, 3, 4, 4, 4, 4, 5, 5, 5, 5, 0};
const int kDistBase[30] = {1,    2,    3,    4,    5,    7,     9,     13,    17,   25,
                           33,   49,   65,   97,   129,  193,   257,   385,   513,  769,
                           1025, 1537, 2049, 3073, 4097, 6145,  8193,  12289, 16385, 24577};
const int kDistExtra[30] = {0, 0, 0, 0, 1, 1, 2, 2, 3, 3, 4,  4,  5,  5,  6,
                            6, 7, 7, 8, 8, 9, 9, 10, 10, 11, 11, 12, 12, 13, 13};

void inflate_block(BitReader& br, const Huffman& lit, const Huffman& dist,
                   std::vector<uint8_t>& out) {
  for (;;) {
    const int sym = lit.decode(br);
    if (sym < 256) {
      out.push_back(static_cast<uint8_t>(sym));
    } else if (sym == 256) {
      return;
    } else {
      check(sym - 257 < 29, "inflate: invalid length symbol");
      const int len = kLenBase[sym - 257] + br.bits(kLenExtra[sym - 257]);
      const int dsym = dist.decode(br);
      check(dsym < 30, "inflate: invalid distance symbol");
      const int d = kDistBase[dsym] + br.bits(kDistExtra[dsym]);
      check(static_cast<size_t>(d) <= out.size(), "inflate: distance too far back");
      for (int i = 0; i < len; ++i) out.push_back(out[out.size() - static_cast<size_t>(d)]);
    }
  }
}

std::vector<uint8_t> inflate_raw(const uint8_t* data, size_t size) {
  BitReader br{data, size};
  std::vector<uint8_t> out;
  bool final_block = false;
  while (!final_block) {
    final_block = br.bits(1) != 0;
    const int type = br.bits(2);
    if (type == 0) {
      br.align_byte();
      check(br.pos + 4 <= br.size, "inflate: truncated stored block");
      const int len = br.data[br.pos] | (br.data[br.pos + 1] << 8);
      const int nlen = br.data[br.pos + 2] | (br.data[br.pos + 3] << 8);
      check((len ^ 0xffff) == nlen, "inflate: stored block length check failed");
      br.pos += 4;
      check(br.pos + static_cast<size_t>(len) <= br.size, "inflate: truncated stored data");
      out.insert(out.end(), br.data + br.pos, br.data + br.pos + len);
      br.pos += static_cast<size_t>(len);
    } else if (type == 1) {
      std::vector<int> litlen(288);
      for (int i = 0; i < 144; ++i) litlen[static_cast<size_t>(i)] = 8;
      for (int i = 144; i < 256; ++i) litlen[static_cast<size_t>(i)] = 9;
      for (int i = 256; i < 280; ++i) litlen[static_cast<size_t>(i)] = 7;
      for (int i = 280; i < 288; ++i) litlen[static_cast<size_t>(i)] = 8;
      Huffman lit;
      lit.build(litlen);
      Huffman dist;
      dist.build(std::vector<int>(30, 5));
      inflate_block(br, lit, dist, out);
    } else if (type == 2) {
      const int hlit = br.bits(5) + 257;
      const int hdist = br.bits(5) + 1;
      const int hclen = br.bits(4) + 4;
      static const int order[19] = {16, 17, 18, 0, 8,  7, 9,  6, 10, 5,
                                    11, 4,  12, 3, 13, 2, 14, 1, 15};
      std::vector<int> cl_lens(19, 0);
      for (int i = 0; i < hclen; ++i) cl_lens[static_cast<size_t>(order[i])] = br.bits(3);
      Huffman cl;
      cl.build(cl_lens);
      std::vector<int> lens;
      lens.reserve(static_cast<size_t>(hlit + hdist));
      while (static_cast<int>(lens.size()) < hlit + hdist) {
        const int sym = cl.decode(br);
        if (sym < 16) {
          lens.push_back(sym);
        } else if (sym == 16) {
          check(!lens.empty(), "inflate: repeat with no previous length");
          const int rep = 3 + br.bits(2);
          for (int i = 0; i < rep; ++i) lens.push_back(lens.back());
        } else if (sym == 17) {
          const int rep = 3 + br.bits(3);
          for (int i = 0; i < rep; ++i) lens.push_back(0);
        } else {
          const int rep = 11 + br.bits(7);
          for (int i = 0; i < rep; ++i) lens.push_back(0);
        }
      }
      check(static_cast<int>(lens.size()) == hlit + hdist, "inflate: code length overflow");
      Huffman lit, dist;
      lit.build(std::vector<int>(lens.begin(), lens.begin() + hlit));
      dist.build(std::vector<int>(lens.begin() + hlit, lens.end()));
      inflate_block(br, lit, dist, out);
    } else {
      throw std::runtime_error("inflate: invalid block type");
    }
  }
  return out;
}

}  // namespace

std::vector<uint8_t> zlib_inflate(const uint8_t* data, size_t size) {
  check(size >= 6, "zlib: stream too short");
  const uint8_t cmf = data[0], flg = data[1];
  check((cmf & 0x0f) == 8, "zlib: unsupported compression method");
  check((static_cast<unsigned>(cmf) * 256 + flg) % 31 == 0, "zlib: bad header check");
  check((flg & 0x20) == 0, "zlib: preset dictionary not supported");
  auto out = inflate_raw(data + 2, size - 6);
  const uint8_t* tail = data + size - 4;
  const uint32_t expect = (static_cast<uint32_t>(tail[0]) << 24) |
                          (static_cast<uint32_t>(tail[1]) << 16) |
                          (static_cast<uint32_t>(tail[2]) << 8) | tail[3];
  check(adler32(out.data(), out.size()) == expect, "zlib: adler32 mismatch");
  return out;
}

// ---------------------------------------------------------------------------
// PNG
// ---------------------------------------------------------------------------

namespace {

uint32_t read_be32(const uint8_t* p) {
  return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
         (static_cast<uint32_t>(p[2]) << 8) | p[3];
}

void put_be32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>((v >> 24) & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<uint8_t>(v & 0xff));
}

void append_chunk(std::vector<uint8_t>& out, const char type[4],
                  const std::vector<uint8_t>& body) {
  put_be32(out, static_cast<uint32_t>(body.size()));
  std::vector<uint8_t> tc;
  tc.insert(tc.end(), type, type + 4);
  tc.insert(tc.end(), body.begin(), body.end());
  out.insert(out.end(), tc.begin(), tc.end());
  put_be32(out, crc32(tc.data(), tc.size()));
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

const uint8_t kPngSig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};

}  // namespace

RgbImage decode_png(const std::vector<uint8_t>& bytes) {
  check(bytes.size() > 8 && std::memcmp(bytes.data(), kPngSig, 8) == 0,
        "png: bad signature");
  size_t pos = 8;
  int width = 0, height = 0, bit_depth = 0, color_type = 0;
  std::vector<uint8_t> idat;
  bool saw_end = false;
  while (pos + 8 <= bytes.size() && !saw_end) {
    const uint32_t len = read_be32(bytes.data() + pos);
    check(pos + 12 + len <= bytes.size(), "png: truncated chunk");
    const char* type = reinterpret_cast<const char*>(bytes.data() + pos + 4);
    const uint8_t* body = bytes.data() + pos + 8;
    if (std::memcmp(type, "IHDR", 4) == 0) {
      check(len == 13, "png: bad IHDR");
      width = static_cast<int>(read_be32(body));
      height = static_cast<int>(read_be32(body + 4));
      bit_depth = body[8];
      color_type = body[9];
      check(body[12] == 0, "png: interlaced images not supported");
      check(bit_depth == 8, "png: only 8-bit depth supported");
      check(color_type == 0 || color_type == 2 || color_type == 6,
            "png: unsupported color type " + std::to_string(color_type));
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), body, body + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      saw_end = true;
    }
    pos += 12 + len;
  }
  check(width > 0 && height > 0, "png: missing IHDR");
  check(!idat.empty(), "png: missing IDAT");
  const int ch = color_type == 0 ? 1 : (color_type == 2 ? 3 : 4);
  const auto raw = zlib_inflate(idat.data(), idat.size());
  const size_t stride = static_cast<size_t>(width) * ch;
  check(raw.size() == (stride + 1) * static_cast<size_t>(height), "png: scanline size mismatch");

  std::vector<uint8_t> pix(stride * static_cast<size_t>(height));
  for (int y = 0; y < height; ++y) {
    const uint8_t filter = raw[(stride + 1) * static_cast<size_t>(y)];
    const uint8_t* src = raw.data() + (stride + 1) * static_cast<size_t>(y) + 1;
    uint8_t* cur = pix.data() + stride * static_cast<size_t>(y);
    const uint8_t* up = y > 0 ? pix.data() + stride * static_cast<size_t>(y - 1) : nullptr;
    for (size_t i = 0; i < stride; ++i) {
      const int a = i >= static_cast<size_t>(ch) ? cur[i - ch] : 0;
      const int b = up ? up[i] : 0;
      const int c = (up && i >= static_cast<size_t>(ch)) ? up[i - ch] : 0;
      int v = src[i];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += paeth(a, b, c); break;
        default: throw std::runtime_error("png: unknown filter type");
      }
      cur[i] = static_cast<uint8_t>(v & 0xff);
    }
  }

  RgbImage img(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const uint8_t* p = pix.data() + (static_cast<size_t>(y) * width + x) * ch;
      if (ch == 1) {
        const float v = byte_to_float(p[0]);
        img.at(x, y, 0) = v;
        img.at(x, y, 1) = v;
        img.at(x, y, 2) = v;
      } else {
        img.at(x, y, 0) = byte_to_float(p[0]);
        img.at(x, y, 1) = byte_to_float(p[1]);
        img.at(x, y, 2) = byte_to_float(p[2]);
      }
    }
  return img;
}

std::vector<uint8_t> encode_png(const RgbImage& img) {
  check(img.width >= 1 && img.height >= 1, "png: empty image");
  const size_t stride = static_cast<size_t>(img.width) * 3;
  std::vector<uint8_t> raw((stride + 1) * static_cast<size_t>(img.height));
  for (int y = 0; y < img.height; ++y) {
    uint8_t* row = raw.data() + (stride + 1) * static_cast<size_t>(y);
    row[0] = 0;  // filter: none
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c)
        row[1 + static_cast<size_t>(x) * 3 + c] = float_to_byte(img.at(x, y, c));
  }

  // zlib with stored deflate blocks
  std::vector<uint8_t> z;
  z.push_back(0x78);
  z.push_back(0x01);
  size_t off = 0;
  while (off < raw.size() || raw.empty()) {
    const size_t n = std::min<size_t>(65535, raw.size() - off);
    const bool last = off + n == raw.size();
    z.push_back(last ? 1 : 0);
    z.push_back(static_cast<uint8_t>(n & 0xff));
    z.push_back(static_cast<uint8_t>((n >> 8) & 0xff));
    z.push_back(static_cast<uint8_t>(~n & 0xff));
    z.push_back(static_cast<uint8_t>((~n >> 8) & 0xff));
    z.insert(z.end(), raw.begin() + static_cast<std::ptrdiff_t>(off),
             raw.begin() + static_cast<std::ptrdiff_t>(off + n));
    off += n;
    if (last) break;
  }
  const uint32_t ad = adler32(raw.data(), raw.size());
  z.push_back(static_cast<uint8_t>((ad >> 24) & 0xff));
  z.push_back(static_cast<uint8_t>((ad >> 16) & 0xff));
  z.push_back(static_cast<uint8_t>((ad >> 8) & 0xff));
  z.push_back(static_cast<uint8_t>(ad & 0xff));

  std::vector<uint8_t> out(kPngSig, kPngSig + 8);
  std::vector<uint8_t> ihdr;
  put_be32(ihdr, static_cast<uint32_t>(img.width));
  put_be32(ihdr, static_cast<uint32_t>(img.height));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // color type: RGB
  ihdr.push_back(0);   // compression
  ihdr.push_back(0);   // filter
  ihdr.push_back(0);   // interlace
  append_chunk(out, "IHDR", ihdr);
  append_chunk(out, "IDAT", z);
  append_chunk(out, "IEND", {});
  return out;
}

RgbImage read_png(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  check(f.good(), "png: cannot open '" + path + "'");
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());
  try {
    return decode_png(bytes);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string(e.what()) + " while reading '" + path + "'");
  }
}

void write_png(const RgbImage& img, const std::string& path) {
  const auto bytes = encode_png(img);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    check(f.good(), "png: cannot open '" + tmp + "' for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    check(f.good(), "png: write failed for '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

Tensor image_to_tensor(const RgbImage& img) {
  Tensor t = Tensor::zeros({1, 3, img.height, img.width});
  auto d = t.mutable_data();
  const int64_t plane = static_cast<int64_t>(img.height) * img.width;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c)
        d[c * plane + static_cast<int64_t>(y) * img.width + x] = img.at(x, y, c);
  return t;
}

RgbImage tensor_to_image(const Tensor& t) {
  check(t.ndim() == 4 && t.dim(0) == 1 && t.dim(1) == 3,
        "tensor_to_image expects [1,3,H,W], got " + t.shape_str());
  const int h = t.dim(2), w = t.dim(3);
  RgbImage img(w, h);
  auto d = t.data();
  const int64_t plane = static_cast<int64_t>(h) * w;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(x, y, c) = d[c * plane + static_cast<int64_t>(y) * w + x];
  img.clamp01();
  return img;
}

}  // namespace san
