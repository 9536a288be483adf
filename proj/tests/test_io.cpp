#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "adm/io.hpp"

namespace fs = std::filesystem;
using namespace adm;

namespace {

ModelParams small(double g1 = 0.7, double g2 = 0.3, double kappa = 0.5) {
  ModelParams p;
  p.n_atoms = 2;
  p.n_max = 3;
  p.g1 = g1;
  p.g2 = g2;
  p.kappa = kappa;
  return p;
}

fs::path scratch(const std::string& name) {
  auto d = fs::temp_directory_path() / ("adm_io_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Cache, GeneratorRoundTripIsExact) {
  const auto p = small();
  const BasisMap basis(p);
  const auto l = select_sector(build_liouvillian(p, {}, {}, MemoryBudget{}), basis, Sector::Even);
  const auto path = scratch("gen") / "g.bin";
  io::save_generator(path, l);
  const auto back = io::load_generator(path, p);
  EXPECT_EQ(back.sector, l.sector);
  EXPECT_EQ(back.indices, l.indices);
  ASSERT_EQ(back.matrix.rows(), l.matrix.rows());
  EXPECT_EQ(CMatrix(back.matrix - l.matrix).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Cache, SpectrumRoundTripIsBitExact) {
  const auto p = small();
  const BasisMap basis(p);
  const auto l = select_sector(build_liouvillian(p, {}, {}, MemoryBudget{}), basis, Sector::Odd);
  const auto s = eigendecompose(l, VectorMode::Both);
  const auto path = scratch("spec") / "s.bin";
  io::save_spectrum(path, s);
  const auto back = io::load_spectrum(path, p);
  ASSERT_EQ(back.eigenvalues.size(), s.eigenvalues.size());
  for (std::size_t i = 0; i < s.eigenvalues.size(); ++i) EXPECT_EQ(back.eigenvalues[i], s.eigenvalues[i]);
  ASSERT_TRUE(back.right && back.left);
  EXPECT_TRUE(*back.right == *s.right);
  EXPECT_TRUE(*back.left == *s.left);
  EXPECT_EQ(back.indices, s.indices);
  EXPECT_EQ(back.sector, Sector::Odd);
}

TEST(Cache, ValuesOnlySpectrumHasNoVectors) {
  const auto p = small();
  const auto s = eigendecompose(build_liouvillian(p, {}, {}, MemoryBudget{}), VectorMode::None);
  const auto path = scratch("spec_none") / "s.bin";
  io::save_spectrum(path, s);
  const auto back = io::load_spectrum(path, p);
  EXPECT_FALSE(back.right);
  EXPECT_FALSE(back.left);
  EXPECT_EQ(back.eigenvalues, s.eigenvalues);
}

TEST(Cache, ParamsMismatchIsRejected) {
  const auto p = small();
  const auto s = eigendecompose(build_liouvillian(p, {}, {}, MemoryBudget{}), VectorMode::None);
  const auto path = scratch("mismatch") / "s.bin";
  io::save_spectrum(path, s);
  EXPECT_THROW(io::load_spectrum(path, small(0.7, 0.30000000000000004)), io::FormatError);
}

TEST(Cache, BadMagicAndTruncationAreRejected) {
  const auto dir = scratch("bad");
  const auto p = small();
  {
    std::ofstream os(dir / "junk.bin", std::ios::binary);
    os << "NOTACACHEFILE";
  }
  EXPECT_THROW(io::load_spectrum(dir / "junk.bin", p), io::FormatError);
  EXPECT_THROW(io::load_generator(dir / "junk.bin", p), io::FormatError);

  const auto s = eigendecompose(build_liouvillian(p, {}, {}, MemoryBudget{}), VectorMode::None);
  io::save_spectrum(dir / "s.bin", s);
  const auto bytes = slurp(dir / "s.bin");
  {
    std::ofstream os(dir / "cut.bin", std::ios::binary);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  EXPECT_THROW(io::load_spectrum(dir / "cut.bin", p), io::FormatError);
  // A generator file is not a spectrum file.
  io::save_generator(dir / "g.bin", build_liouvillian(p, {}, {}, MemoryBudget{}));
  EXPECT_THROW(io::load_spectrum(dir / "g.bin", p), io::FormatError);
}

TEST(Cache, PathDependsOnParamsAndSector) {
  const auto a = io::cache_path("c", "spec", small(), Sector::Even);
  EXPECT_NE(a, io::cache_path("c", "spec", small(), Sector::Odd));
  EXPECT_NE(a, io::cache_path("c", "spec", small(0.71), Sector::Even));
  EXPECT_NE(a, io::cache_path("c", "specb", small(), Sector::Even));
  EXPECT_EQ(a, io::cache_path("c", "spec", small(), Sector::Even));
}

TEST(Csv, DoublesRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0, -0.0}) EXPECT_EQ(std::stod(io::fmt_double(v)), v);
  EXPECT_EQ(io::fmt_double(std::numeric_limits<double>::quiet_NaN()), "nan");
}

TEST(Csv, WriterFormatsAndChecksColumns) {
  const auto path = scratch("csv") / "t.csv";
  {
    io::CsvWriter w(path, {"a", "b", "c"});
    w.row(1, 0.5, "x");
    w.row(std::size_t{7}, -1.0, std::string("y"));
    EXPECT_THROW(w.row(1, 2), std::logic_error);
  }
  EXPECT_EQ(slurp(path), "a,b,c\n1,0.5,x\n7,-1,y\n");
}
