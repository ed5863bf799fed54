#include "ambiver/image.hpp"

#include <fstream>

namespace ambiver {

namespace {
void expect(bool ok, const std::string& msg) {
  if (!ok) throw ImageError(msg);
}

// Reads the P6/P5 header, skipping comments.
void read_header(std::istream& in, const std::string& magic, int* w, int* h, int* maxval) {
  std::string tag;
  in >> tag;
  expect(tag == magic, "bad magic, expected " + magic + " got " + tag);
  int fields[3];
  for (int& f : fields) {
    in >> std::ws;
    while (in.peek() == '#') {
      std::string comment;
      std::getline(in, comment);
      in >> std::ws;
    }
    expect(static_cast<bool>(in >> f), "truncated header");
  }
  *w = fields[0];
  *h = fields[1];
  *maxval = fields[2];
  in.get();  // single whitespace after maxval
}
}  // namespace

void write_ppm(const std::string& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  expect(static_cast<bool>(out), "cannot write " + path);
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size() * 3));
}

Image read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  expect(static_cast<bool>(in), "cannot read " + path);
  int w, h, maxval;
  read_header(in, "P6", &w, &h, &maxval);
  expect(maxval == 255, "only 8-bit PPM supported");
  Image img(w, h);
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size() * 3));
  expect(static_cast<bool>(in), "truncated pixel data in " + path);
  return img;
}

void write_pgm16(const std::string& path, const DepthImage& img) {
  std::ofstream out(path, std::ios::binary);
  expect(static_cast<bool>(out), "cannot write " + path);
  out << "P5\n" << img.width << " " << img.height << "\n65535\n";
  for (std::uint16_t v : img.depth_mm) {
    const char bytes[2] = {static_cast<char>(v >> 8), static_cast<char>(v & 0xff)};
    out.write(bytes, 2);
  }
}

DepthImage read_pgm16(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  expect(static_cast<bool>(in), "cannot read " + path);
  int w, h, maxval;
  read_header(in, "P5", &w, &h, &maxval);
  expect(maxval == 65535, "expected 16-bit PGM");
  DepthImage img(w, h);
  for (std::uint16_t& v : img.depth_mm) {
    char bytes[2];
    in.read(bytes, 2);
    v = static_cast<std::uint16_t>((static_cast<unsigned char>(bytes[0]) << 8) |
                                   static_cast<unsigned char>(bytes[1]));
  }
  expect(static_cast<bool>(in), "truncated depth data in " + path);
  return img;
}

}  // namespace ambiver
