#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <map>
#include <sstream>

#include "textrisk/common/csv.hpp"
#include "textrisk/common/error.hpp"
#include "textrisk/common/rng.hpp"
#include "textrisk/data/description.hpp"
#include "textrisk/data/feature_table.hpp"
#include "textrisk/data/ingest.hpp"
#include "textrisk/pipeline/synth.hpp"

using namespace textrisk;
using namespace textrisk::data;

namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::validation;
}

LoanRecord record(const std::string& id, const std::string& purpose, int label = 0) {
  LoanRecord r;
  r.id = id;
  r.revenue = 50000;
  r.dti_n = 12.5;
  r.loan_amnt = 10000;
  r.fico_n = 700;
  r.emp_length = "3 years";
  r.purpose = purpose;
  r.home_ownership = "RENT";
  r.addr_state = "CA";
  r.desc = "need a loan";
  r.label = label;
  return r;
}

}  // namespace

TEST(CleanDescription, StampAndEntity) {
  EXPECT_EQ(clean_description("Borrower added on 03/12/11 > need funds &amp; fast"), "need funds & fast");
}

TEST(CleanDescription, BoilerplateRejected) {
  EXPECT_FALSE(clean_description("Tell your story. What is your loan for?"));
  EXPECT_FALSE(clean_description("  tell your   story.  What is your LOAN for? "));
}

TEST(CleanDescription, EmptyRejected) {
  EXPECT_FALSE(clean_description(""));
  EXPECT_FALSE(clean_description("   \t "));
  EXPECT_FALSE(clean_description("Borrower added on 01/02/2013 >   "));
}

TEST(CleanDescription, LessThanEntity) { EXPECT_EQ(clean_description("a &lt; b"), "a < b"); }

TEST(CleanDescription, EveryStampRemoved) {
  EXPECT_EQ(clean_description("Borrower added on 01/02/13 > first<br>Borrower added on 05/06/2013 > second"),
            "first second");
}

TEST(CleanDescription, NumericEntities) {
  EXPECT_EQ(clean_description("I&#39;m fine &#x26; well"), "I'm fine & well");
}

TEST(CleanDescription, BoilerplateInsideTextIsLogged) {
  const auto out = clean_description_detailed("Tell your story. What is your loan for? To buy a car.");
  ASSERT_TRUE(out.text);
  EXPECT_TRUE(out.boilerplate_substring_hit);
}

TEST(DeriveFico, Midpoints) {
  EXPECT_DOUBLE_EQ(derive_fico(700, 704), 702.0);
  EXPECT_DOUBLE_EQ(derive_fico(660, 664), 662.0);
  EXPECT_DOUBLE_EQ(derive_fico(850, 850), 850.0);
  EXPECT_DOUBLE_EQ(derive_fico(700, 703), 701.5);
}

TEST(DeriveFico, OutOfRangeNamesRow) {
  try {
    derive_fico(290, 700, "L42");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::validation);
    EXPECT_NE(std::string(e.what()).find("L42"), std::string::npos);
  }
  EXPECT_EQ(code_of([] { derive_fico(704, 700); }), Errc::validation);
}

TEST(HomeOwnership, Merge) {
  EXPECT_EQ(merge_home_ownership("NONE"), "OTHER");
  EXPECT_EQ(merge_home_ownership("MORTGAGE"), "MORTGAGE");
  EXPECT_EQ(merge_home_ownership("ANY"), "OTHER");
  EXPECT_EQ(merge_home_ownership("other"), "OTHER");
  EXPECT_EQ(code_of([] { merge_home_ownership("CASTLE"); }), Errc::validation);
}

TEST(FeatureTable, OneHotPurpose) {
  const std::vector<LoanRecord> recs{record("a", "car"), record("b", "car"), record("c", "wedding")};
  const auto t = build_feature_table(recs);
  const auto c0 = t.column_index("purpose=car");
  const auto c1 = t.column_index("purpose=wedding");
  EXPECT_EQ(c1, c0 + 1);
  EXPECT_EQ(t.values(0, c0), 1.0);
  EXPECT_EQ(t.values(0, c1), 0.0);
  EXPECT_EQ(t.values(1, c0), 1.0);
  EXPECT_EQ(t.values(2, c0), 0.0);
  EXPECT_EQ(t.values(2, c1), 1.0);
  // 4 quantitative + one level each for three blocks + two purposes
  EXPECT_EQ(t.columns.size(), 4u + 1 + 2 + 1 + 1);
}

TEST(FeatureTable, ExtraColumnMisaligned) {
  const std::vector<LoanRecord> recs{record("a", "car"), record("b", "car")};
  ExtraColumn e{"text_score", {{"a", 0.3}}};
  EXPECT_EQ(code_of([&] { build_feature_table(recs, {e}); }), Errc::validation);
  e.values["b"] = 0.4;
  const auto t = build_feature_table(recs, {e});
  EXPECT_EQ(t.columns.back(), "text_score");
  EXPECT_EQ(t.values(1, t.columns.size() - 1), 0.4);
}

TEST(FeatureTable, DuplicateIds) {
  const std::vector<LoanRecord> recs{record("a", "car"), record("a", "car")};
  EXPECT_EQ(code_of([&] { build_feature_table(recs); }), Errc::duplicate_id);
}

TEST(FeatureTable, BlocksExclusiveAndExhaustive) {
  std::stringstream csv;
  pipeline::SynthOptions opt;
  opt.rows = 400;
  pipeline::write_synthetic_csv(csv, opt);
  ColumnMap map;
  map.source = {{"revenue", "annual_inc"}, {"dti_n", "dti"}, {"label", "loan_status"}};
  const auto result = ingest_csv(csv, map);
  const auto t = build_feature_table(result.records);
  for (const auto& block : t.blocks) {
    std::map<std::string, double> counts;
    for (std::size_t i = 0; i < t.rows(); ++i) {
      double sum = 0;
      for (std::size_t l = 0; l < block.levels.size(); ++l) sum += t.values(i, block.first_column + l);
      ASSERT_EQ(sum, 1.0);
    }
    // column sums equal the level counts
    for (const auto& r : result.records) counts[categorical_value(r, block.variable)] += 1;
    for (std::size_t l = 0; l < block.levels.size(); ++l) {
      double col = 0;
      for (std::size_t i = 0; i < t.rows(); ++i) col += t.values(i, block.first_column + l);
      EXPECT_EQ(col, counts[block.levels[l]]);
    }
  }
}

TEST(FeatureTable, DeterministicHeaderAndBody) {
  std::vector<LoanRecord> recs;
  for (int i = 0; i < 20; ++i) recs.push_back(record("r" + std::to_string(i), i % 3 ? "car" : "medical", i % 2));
  std::ostringstream a, b;
  write_feature_csv(a, build_feature_table(recs));
  write_feature_csv(b, build_feature_table(recs));
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().substr(0, a.str().find('\n')),
            "id,revenue,dti_n,loan_amnt,fico_n,emp_length=3 years,purpose=car,purpose=medical,"
            "home_ownership=RENT,addr_state=CA,label");
}

namespace {
const char* kHeader =
    "id,annual_inc,dti,loan_amnt,fico_range_low,fico_range_high,emp_length,purpose,home_ownership,addr_state,desc,"
    "loan_status,extra\n";
}

TEST(Ingest, FiltersAndCounts) {
  std::string csv = kHeader;
  csv += "1,50000,10,1000,700,704,2 years,car,NONE,CA,Need a car,Fully Paid,x\n";          // kept
  csv += "2,,10,1000,700,704,2 years,car,RENT,CA,Need a car,Fully Paid,x\n";               // missing income
  csv += "3,50000,10,1000,700,704,2 years,car,RENT,CA,Tell your story. What is your loan for?,Charged Off,x\n";
  csv += "4,50000,10,1000,700,704,n/a,debt_consolidation,ANY,NY,\"pay &amp; save\",Charged Off,x\n";  // kept
  csv += "5,50000,10,1000,700,704,2 years,car,RENT,CA,,Fully Paid,x\n";                    // empty desc
  csv += "6,50000,,1000,700,704,2 years,car,RENT,CA,ok,Fully Paid,x\n";                    // missing dti
  std::istringstream in(csv);
  ColumnMap map;
  map.source = {{"revenue", "annual_inc"}, {"dti_n", "dti"}, {"label", "loan_status"}};
  const auto r = ingest_csv(in, map);
  ASSERT_EQ(r.records.size(), 2u);
  EXPECT_EQ(r.stats.rows_read, 6u);
  EXPECT_EQ(r.stats.dropped.at("missing_quantitative"), 2u);
  EXPECT_EQ(r.stats.dropped.at("rejected_description"), 1u);
  EXPECT_EQ(r.stats.dropped.at("missing_description"), 1u);
  EXPECT_EQ(r.records[0].home_ownership, "OTHER");
  EXPECT_EQ(r.records[0].fico_n, 702.0);
  EXPECT_EQ(r.records[1].emp_length, "NI");
  EXPECT_EQ(r.records[1].purpose, "debt consolidation");
  EXPECT_EQ(r.records[1].desc, "pay & save");
  EXPECT_EQ(r.records[1].label, 1);
  EXPECT_EQ(r.stats.ignored_columns, std::vector<std::string>{"extra"});
}

TEST(Ingest, DtiFromComponents) {
  std::string csv =
      "id,revenue,dti_obligations,dti_income,loan_amnt,fico_n,emp_length,purpose,home_ownership,addr_state,desc,"
      "label\n";
  csv += "a,60000,500,4000,1000,700,1 year,car,RENT,TX,hello there,0\n";
  std::istringstream in(csv);
  const auto r = ingest_csv(in);
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_DOUBLE_EQ(r.records[0].dti_n, 12.5);
}

TEST(Ingest, MalformedNumberIsValidationError) {
  std::string csv = kHeader;
  csv += "1,abc,10,1000,700,704,2 years,car,RENT,CA,Need a car,Fully Paid,x\n";
  std::istringstream in(csv);
  ColumnMap map;
  map.source = {{"revenue", "annual_inc"}, {"dti_n", "dti"}, {"label", "loan_status"}};
  EXPECT_EQ(code_of([&] { ingest_csv(in, map); }), Errc::validation);
}

TEST(Ingest, SyntheticRowCountMatchesFilterRule) {
  std::stringstream csv;
  pipeline::SynthOptions opt;
  opt.rows = 1000;
  pipeline::write_synthetic_csv(csv, opt);
  const std::string text = csv.str();
  // independent count: rows whose description survives cleaning
  std::istringstream raw(text);
  csv::Reader reader(raw);
  const auto header = *reader.next();
  const auto desc_col = static_cast<std::size_t>(std::find(header.begin(), header.end(), "desc") - header.begin());
  std::size_t expected = 0;
  while (auto row = reader.next())
    if (clean_description((*row)[desc_col])) ++expected;
  std::istringstream in(text);
  ColumnMap map;
  map.source = {{"revenue", "annual_inc"}, {"dti_n", "dti"}, {"label", "loan_status"}};
  const auto r = ingest_csv(in, map);
  EXPECT_EQ(r.records.size(), expected);
  EXPECT_LT(expected, 1000u);  // the generator plants boilerplate rows
}

TEST(Ingest, RecordsRoundTripByteIdentical) {
  std::stringstream csv;
  pipeline::SynthOptions opt;
  opt.rows = 300;
  pipeline::write_synthetic_csv(csv, opt);
  ColumnMap map;
  map.source = {{"revenue", "annual_inc"}, {"dti_n", "dti"}, {"label", "loan_status"}};
  const auto r = ingest_csv(csv, map);
  std::ostringstream a;
  write_records_csv(a, r.records);
  std::istringstream back(a.str());
  std::ostringstream b;
  write_records_csv(b, read_records_csv(back));
  EXPECT_EQ(a.str(), b.str());
}
