#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <random>

#include "chem_fixture.hpp"
#include "repur/chem.hpp"

using namespace repur;
using namespace repur::chem;

namespace {

SmilesErrorKind error_kind(std::string_view s) {
  try {
    parse_smiles(s);
  } catch (const SmilesError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error for " << s;
  return SmilesErrorKind::empty;
}

// Plain recursive edit distance with memo table.
std::size_t edit_oracle(const std::string& a, const std::string& b) {
  std::vector<std::vector<int>> memo(a.size() + 1, std::vector<int>(b.size() + 1, -1));
  std::function<int(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) -> int {
    if (i == a.size()) return static_cast<int>(b.size() - j);
    if (j == b.size()) return static_cast<int>(a.size() - i);
    int& m = memo[i][j];
    if (m >= 0) return m;
    m = std::min({go(i + 1, j) + 1, go(i, j + 1) + 1, go(i + 1, j + 1) + (a[i] == b[j] ? 0 : 1)});
    return m;
  };
  return static_cast<std::size_t>(go(0, 0));
}

}  // namespace

TEST(Parse, Ethanol) {
  const Molecule m = parse_smiles("CCO");
  ASSERT_EQ(m.atoms.size(), 3u);
  EXPECT_EQ(m.atoms[0].element, "C");
  EXPECT_EQ(m.atoms[2].element, "O");
  ASSERT_EQ(m.bonds.size(), 2u);
  for (const auto& b : m.bonds) EXPECT_EQ(b.order, BondOrder::single);
}

TEST(Parse, RingClosure) {
  const Molecule m = parse_smiles("C1CC1");
  EXPECT_EQ(m.atoms.size(), 3u);
  EXPECT_EQ(m.bonds.size(), 3u);
  const Molecule pct = parse_smiles("C%12CC%12");
  EXPECT_EQ(pct.bonds.size(), 3u);
}

TEST(Parse, TwoLetterHalogensAndBrackets) {
  const Molecule m = parse_smiles("ClCBr");
  ASSERT_EQ(m.atoms.size(), 3u);
  EXPECT_EQ(m.atoms[0].element, "Cl");
  EXPECT_EQ(m.atoms[2].element, "Br");
  const Molecule ion = parse_smiles("[13CH3-]");
  ASSERT_EQ(ion.atoms.size(), 1u);
  EXPECT_EQ(ion.atoms[0].charge, -1);
  EXPECT_EQ(ion.atoms[0].explicit_h, 3);
  EXPECT_TRUE(ion.atoms[0].bracket);
}

TEST(Parse, StereoMarksIgnored) {
  EXPECT_EQ(parse_smiles("F/C=C/F").bonds.size(), 3u);
  EXPECT_EQ(parse_smiles("N[C@@H](C)O").atoms.size(), 4u);
}

TEST(Parse, DistinctErrorKinds) {
  EXPECT_EQ(error_kind(""), SmilesErrorKind::empty);
  EXPECT_EQ(error_kind("C1CC"), SmilesErrorKind::unpaired_ring);
  EXPECT_EQ(error_kind("CC(C"), SmilesErrorKind::unmatched_paren);
  EXPECT_EQ(error_kind("CC)C"), SmilesErrorKind::unmatched_paren);
  EXPECT_EQ(error_kind("CXC"), SmilesErrorKind::unknown_symbol);
  EXPECT_EQ(error_kind("[C"), SmilesErrorKind::malformed_bracket);
}

TEST(Validity, Examples) {
  EXPECT_TRUE(check_validity("CCO").valid);
  const Validity v = check_validity("C(C)(C)(C)(C)C");
  EXPECT_FALSE(v.valid);
  EXPECT_FALSE(v.reason.empty());
}

TEST(Validity, HandLabeledFixture) {
  for (const auto& [smiles, valid] : repur::testing::kValidityFixture) {
    EXPECT_EQ(check_validity(smiles).valid, valid) << "'" << smiles << "': " << check_validity(smiles).reason;
  }
}

TEST(Validity, ValidImpliesParses) {
  for (const auto& [smiles, valid] : repur::testing::kValidityFixture) {
    if (check_validity(smiles).valid) EXPECT_NO_THROW(parse_smiles(smiles));
  }
}

TEST(Validity, ChargeShiftsNitrogenAndOxygen) {
  EXPECT_TRUE(check_validity("C[O+](C)C").valid);
  EXPECT_FALSE(check_validity("CO(C)C").valid);
}

TEST(MolecularWeight, HandSums) {
  EXPECT_NEAR(molecular_weight(parse_smiles("C")), 12.011 + 4 * 1.008, 1e-9);
  EXPECT_NEAR(molecular_weight(parse_smiles("C")), 16.04, 0.01);
  EXPECT_NEAR(molecular_weight(parse_smiles("O")), 18.02, 0.01);
  EXPECT_NEAR(molecular_weight(parse_smiles("CCO")), 46.07, 0.01);
}

TEST(MolecularWeight, InvariantUnderReordering) {
  const std::vector<std::pair<std::string, std::string>> pairs = {
      {"CCO", "OCC"}, {"CC(=O)O", "OC(C)=O"}, {"c1ccccc1O", "Oc1ccccc1"}, {"ClCCBr", "BrCCCl"}};
  for (const auto& [a, b] : pairs) {
    EXPECT_NEAR(molecular_weight(parse_smiles(a)), molecular_weight(parse_smiles(b)), 1e-9) << a;
  }
}

TEST(MolecularWeight, AromaticRingsGetOneHydrogenPerCarbon) {
  EXPECT_NEAR(molecular_weight(parse_smiles("c1ccccc1")), 6 * 12.011 + 6 * 1.008, 1e-9);
}

TEST(MolecularWeight, UntabulatedElementThrows) {
  EXPECT_THROW(molecular_weight(parse_smiles("[Rn]")), std::domain_error);
}

TEST(Fingerprint, SingleAtomSetsOneBit) { EXPECT_EQ(fingerprint(parse_smiles("C")).count(), 1u); }

TEST(Fingerprint, SameGraphSameBits) {
  EXPECT_EQ(fingerprint(parse_smiles("CCO")), fingerprint(parse_smiles("OCC")));
  EXPECT_EQ(fingerprint(parse_smiles("c1ccccc1")), fingerprint(parse_smiles("c1ccccc1")));
}

TEST(Fingerprint, PathLabelsCanonical) {
  const auto labels = path_labels(parse_smiles("CCO"));
  EXPECT_TRUE(std::find(labels.begin(), labels.end(), "C-C-O") != labels.end());
  EXPECT_TRUE(std::find(labels.begin(), labels.end(), "O-C-C") == labels.end());
}

TEST(Tanimoto, SetArithmetic) {
  Fingerprint a(64), b(64);
  for (int bit : {1, 2, 3}) a.set(bit);
  for (int bit : {2, 3, 4}) b.set(bit);
  EXPECT_DOUBLE_EQ(tanimoto_distance(a, b), 0.5);
  EXPECT_DOUBLE_EQ(tanimoto_distance(a, a), 0.0);
  Fingerprint c(64);
  c.set(10);
  EXPECT_DOUBLE_EQ(tanimoto_distance(a, c), 1.0);
  EXPECT_DOUBLE_EQ(tanimoto_distance(Fingerprint(64), Fingerprint(64)), 0.0);
  EXPECT_THROW(tanimoto_distance(a, Fingerprint(128)), std::invalid_argument);
}

TEST(Tanimoto, BoundedAndSymmetricOnMolecules) {
  const std::vector<std::string> mols = {"CCO", "c1ccccc1", "CC(=O)O", "C#N", "CCCCCl", "OP(=O)(O)O"};
  for (const auto& x : mols) {
    for (const auto& y : mols) {
      const auto fx = fingerprint(parse_smiles(x));
      const auto fy = fingerprint(parse_smiles(y));
      const double d = tanimoto_distance(fx, fy);
      EXPECT_GE(d, 0.0);
      EXPECT_LE(d, 1.0);
      EXPECT_DOUBLE_EQ(d, tanimoto_distance(fy, fx));
      if (x == y) EXPECT_EQ(d, 0.0);
    }
  }
}

TEST(Levenshtein, Examples) {
  EXPECT_EQ(levenshtein("abc", "abc"), 0u);
  EXPECT_EQ(levenshtein("abc", ""), 3u);
  EXPECT_EQ(levenshtein("kitten", "sitting"), 3u);
}

TEST(Levenshtein, OracleAndTriangleInequality) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> len(0, 9), ch(0, 3);
  auto random_string = [&] {
    std::string s(static_cast<std::size_t>(len(rng)), 'a');
    for (char& c : s) c = static_cast<char>('a' + ch(rng));
    return s;
  };
  for (int trial = 0; trial < 300; ++trial) {
    const std::string a = random_string(), b = random_string(), c = random_string();
    ASSERT_EQ(levenshtein(a, b), edit_oracle(a, b));
    ASSERT_EQ(levenshtein(a, b), levenshtein(b, a));
    ASSERT_LE(levenshtein(a, c), levenshtein(a, b) + levenshtein(b, c));
  }
}
