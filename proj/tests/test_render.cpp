#include <doctest.h>

#include <zlib.h>

#include <algorithm>
#include <fstream>
#include <random>

#include "lidar_forge/augment.hpp"
#include "lidar_forge/classes.hpp"
#include "lidar_forge/error.hpp"
#include "lidar_forge/render.hpp"
#include "support/synthetic.hpp"

using namespace lidar_forge;
namespace t = lidar_forge::testing;

namespace {

std::size_t lit_pixels(const Image& image) {
  std::size_t n = 0;
  for (int r = 0; r < image.height; ++r) {
    for (int c = 0; c < image.width; ++c) {
      const auto* px = image.at(r, c);
      bool lit = false;
      for (int k = 0; k < image.channels; ++k) lit |= px[k] != 0;
      n += lit;
    }
  }
  return n;
}

std::uint32_t be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) |
         (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
}

// Minimal reader for 8-bit, unfiltered, single-IDAT files.
Image read_png(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), {}};
  const std::uint8_t sig[] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  REQUIRE(bytes.size() > 8);
  REQUIRE(std::equal(sig, sig + 8, bytes.begin()));
  std::size_t pos = 8;
  int width = 0, height = 0, channels = 0;
  std::vector<std::uint8_t> idat;
  while (pos + 12 <= bytes.size()) {
    const auto len = be32(&bytes[pos]);
    const std::string type(bytes.begin() + pos + 4, bytes.begin() + pos + 8);
    const auto* data = &bytes[pos + 8];
    const auto crc = crc32(0L, &bytes[pos + 4], len + 4);
    CHECK(crc == be32(&bytes[pos + 8 + len]));
    if (type == "IHDR") {
      width = static_cast<int>(be32(data));
      height = static_cast<int>(be32(data + 4));
      CHECK(data[8] == 8);
      channels = data[9] == 2 ? 3 : 1;
    } else if (type == "IDAT") {
      idat.insert(idat.end(), data, data + len);
    }
    pos += 12 + len;
  }
  CHECK(pos == bytes.size());
  Image image(width, height, channels);
  const std::size_t stride = static_cast<std::size_t>(width) * channels;
  std::vector<std::uint8_t> raw((stride + 1) * height);
  uLongf raw_size = raw.size();
  REQUIRE(uncompress(raw.data(), &raw_size, idat.data(), idat.size()) == Z_OK);
  REQUIRE(raw_size == raw.size());
  for (int r = 0; r < height; ++r) {
    CHECK(raw[r * (stride + 1)] == 0);
    std::copy_n(raw.begin() + r * (stride + 1) + 1, stride, image.pixels.begin() + r * stride);
  }
  return image;
}

}  // namespace

TEST_CASE("empty cloud renders black") {
  SensorModel s;
  PointCloud empty;
  const auto range = render_range(empty, s);
  CHECK(range.width == 2048);
  CHECK(range.height == 64);
  CHECK(lit_pixels(range) == 0);
  CHECK(lit_pixels(render_classes(empty, s)) == 0);
}

TEST_CASE("single point lights exactly one pixel") {
  SensorModel s;
  PointCloud one;
  one.points.push_back(t::cell_center_point(s, 12, 700, 9.0));
  one.labels = std::vector<LabelRecord>{{classes::kCar, 1}};
  const auto range = render_range(one, s);
  CHECK(lit_pixels(range) == 1);
  CHECK(range.at(12, 700)[0] == 255);
  const auto cls = render_classes(one, s);
  CHECK(lit_pixels(cls) == 1);
  const auto rgb = classes::color(classes::kCar);
  CHECK(cls.at(12, 700)[0] == rgb.r);
  CHECK(cls.at(12, 700)[1] == rgb.g);
  CHECK(cls.at(12, 700)[2] == rgb.b);
}

TEST_CASE("range shading uses the nearest point") {
  SensorModel s;
  PointCloud c;
  c.points = {t::cell_center_point(s, 1, 1, 40.0), t::cell_center_point(s, 1, 1, 10.0),
              t::cell_center_point(s, 2, 2, 20.0)};
  const auto img = render_range(c, s);
  CHECK(img.at(2, 2)[0] == 255);
  CHECK(img.at(1, 1)[0] == 1 + 127);
}

TEST_CASE("fused frame shows both parents in separate regions") {
  SensorModel s;
  std::mt19937_64 gen(3);
  t::RandomCloudOptions left, right;
  left.points = right.points = 3000;
  left.col_window = right.col_window = 300;
  left.col_offset = 100;
  right.col_offset = 1200;
  const auto a = t::random_cloud(gen, s, left);
  const auto b = t::random_cloud(gen, s, right);
  const auto fused = compete_scenes(a, b, s, 0.05);
  std::vector<std::uint16_t> parents(fused.kept_first.size(), 0);
  parents.resize(fused.cloud.size(), 1);
  const auto img = render_provenance(fused.cloud, parents, s);

  t::TempDir dir("render");
  write_png(img, dir.path() / "p.png");
  const auto back = read_png(dir.path() / "p.png");
  CHECK(back.width == img.width);
  CHECK(back.channels == 3);
  CHECK(back.pixels == img.pixels);

  std::size_t green = 0, magenta = 0;
  for (int r = 0; r < back.height; ++r) {
    for (int c = 0; c < back.width; ++c) {
      const auto* px = back.at(r, c);
      if (px[0] == 40 && px[1] == 200 && px[2] == 60) {
        ++green;
        CHECK((c >= 100 && c < 400));
      } else if (px[0] == 220 && px[1] == 40 && px[2] == 220) {
        ++magenta;
        CHECK((c >= 1200 && c < 1500));
      }
    }
  }
  CHECK(green > 100);
  CHECK(magenta > 100);
  CHECK_THROWS_AS(render_provenance(fused.cloud, {}, s), Error);
}

TEST_CASE("gray images round trip through PNG") {
  SensorModel s;
  const auto img = render_range(t::simulate_scene({}, s), s);
  t::TempDir dir("render");
  write_png(img, dir.path() / "r.png");
  const auto back = read_png(dir.path() / "r.png");
  CHECK(back.channels == 1);
  CHECK(back.pixels == img.pixels);
  CHECK(lit_pixels(img) > 100000);
}
