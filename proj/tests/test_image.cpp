#include <doctest.h>

#include <cstdio>
#include <random>

#include "gsdf/image.hpp"

using namespace gsdf;

namespace {

ImageBuffer random_image(int w, int h, int c, uint64_t seed, double lo = 0.0,
                         double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(lo, hi);
    ImageBuffer img(w, h, c);
    for (double& v : img.data) v = uni(rng);
    return img;
}

}  // namespace

TEST_CASE("image buffer indexing is row-major") {
    ImageBuffer img(4, 3, 3);
    CHECK(img.data.size() == 4u * 3u * 3u);
    img.at(2, 1, 1) = 7.0;
    CHECK(img.data[(1 * 4 + 2) * 3 + 1] == 7.0);
}

TEST_CASE("ppm round trip quantizes to 8 bits") {
    ImageBuffer img = random_image(9, 7, 3, 21);
    write_ppm("tmp_img.ppm", img);
    ImageBuffer back = read_ppm("tmp_img.ppm");
    std::remove("tmp_img.ppm");
    REQUIRE(back.same_shape(img));
    for (size_t i = 0; i < img.data.size(); ++i)
        CHECK(std::abs(back.data[i] - img.data[i]) <= 0.5 / 255.0 + 1e-12);
}

TEST_CASE("ppm clamps out-of-range values") {
    ImageBuffer img(2, 1, 3);
    img.data = {-0.5, 0.5, 1.5, 0.0, 1.0, 0.25};
    write_ppm("tmp_img.ppm", img);
    ImageBuffer back = read_ppm("tmp_img.ppm");
    std::remove("tmp_img.ppm");
    CHECK(back.data[0] == doctest::Approx(0.0));
    CHECK(back.data[2] == doctest::Approx(1.0));
}

TEST_CASE("pfm round trip keeps float precision, 1 and 3 channels") {
    for (int c : {1, 3}) {
        ImageBuffer img = random_image(6, 5, c, 31 + c, -3.0, 3.0);
        write_pfm("tmp_img.pfm", img);
        ImageBuffer back = read_pfm("tmp_img.pfm");
        std::remove("tmp_img.pfm");
        REQUIRE(back.same_shape(img));
        for (size_t i = 0; i < img.data.size(); ++i)
            CHECK(std::abs(back.data[i] - img.data[i]) <=
                  1e-6 * std::max(1.0, std::abs(img.data[i])));
    }
}

TEST_CASE("pgm round trip for masks") {
    ImageBuffer img(5, 4, 1);
    std::mt19937_64 rng(3);
    for (double& v : img.data) v = (rng() & 1) ? 1.0 : 0.0;
    write_pgm("tmp_img.pgm", img);
    ImageBuffer back = read_pgm("tmp_img.pgm");
    std::remove("tmp_img.pgm");
    REQUIRE(back.same_shape(img));
    for (size_t i = 0; i < img.data.size(); ++i)
        CHECK(back.data[i] == doctest::Approx(img.data[i]));
}

TEST_CASE("readers reject missing files") {
    CHECK_THROWS(read_ppm("no_such_file.ppm"));
    CHECK_THROWS(read_pfm("no_such_file.pfm"));
    CHECK_THROWS(read_pgm("no_such_file.pgm"));
}
