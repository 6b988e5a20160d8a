#include "textrisk/pipeline/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "textrisk/common/csv.hpp"
#include "textrisk/common/numfmt.hpp"
#include "textrisk/common/rng.hpp"

namespace textrisk::pipeline {

namespace {

struct Weighted {
  const char* value;
  double weight;
};

constexpr std::array kPurposes{
    Weighted{"debt_consolidation", 52}, Weighted{"credit_card", 19}, Weighted{"other", 6},
    Weighted{"home_improvement", 6},    Weighted{"major_purchase", 3}, Weighted{"small_business", 2.5},
    Weighted{"car", 2},                 Weighted{"educational", 2},    Weighted{"moving", 2},
    Weighted{"medical", 1.5},           Weighted{"wedding", 1.5},      Weighted{"house", 1},
    Weighted{"vacation", 1},            Weighted{"renewable_energy", 0.5}};

constexpr std::array kEmployment{
    Weighted{"< 1 year", 8}, Weighted{"1 year", 6.5}, Weighted{"2 years", 9}, Weighted{"3 years", 8},
    Weighted{"4 years", 6},  Weighted{"5 years", 7.5}, Weighted{"6 years", 6}, Weighted{"7 years", 5.5},
    Weighted{"8 years", 4.5}, Weighted{"9 years", 3.5}, Weighted{"10+ years", 30}, Weighted{"n/a", 4}};

constexpr std::array kHome{Weighted{"MORTGAGE", 50}, Weighted{"RENT", 41}, Weighted{"OWN", 8},
                           Weighted{"NONE", 0.5}, Weighted{"OTHER", 0.5}};

constexpr std::array kStates{"CA", "NY", "TX", "FL", "IL", "NJ", "PA", "OH", "GA", "VA",
                             "NC", "MI", "MA", "MD", "AZ", "WA", "CO", "MN", "MO", "CT"};

constexpr std::array kRiskPhrases{
    "I have been late on a couple of payments lately",
    "my hours at work got cut",
    "I really need this loan asap",
    "collection agencies keep calling me",
    "please help me get back on my feet",
    "I lost my job last year and fell behind",
    "I had to use my credit cards to cover rent",
    "I&#39;m behind on some bills right now",
    "my car broke down and I could not pay everything",
    "I need the money urgently"};

constexpr std::array kSafePhrases{
    "I have worked for the same employer for many years",
    "I always pay my bills on time",
    "my credit history is excellent",
    "I have savings set aside for emergencies",
    "this loan will lower my monthly payment",
    "my income covers this payment comfortably",
    "I have never missed a payment",
    "my budget is detailed and I stick to it",
    "I&#39;m a homeowner with a stable salary",
    "I plan to pay this off early"};

constexpr std::array kOpeners{
    "Hello,", "Hi.", "Thank you for considering my request.", "This loan is for",
    "I would like to", "My plan is simple."};

constexpr std::array kPurposeSentences{
    "consolidate my credit card debt into one payment", "pay for a home repair &amp; new appliances",
    "cover some expenses", "finish a project I started", "take care of a few bills",
    "get a lower rate than my current cards"};

template <std::size_t N>
const char* pick(const std::array<Weighted, N>& options, Rng& rng) {
  double total = 0;
  for (const auto& o : options) total += o.weight;
  double u = rng.uniform() * total;
  for (const auto& o : options) {
    if (u < o.weight) return o.value;
    u -= o.weight;
  }
  return options.back().value;
}

template <typename T, std::size_t N>
const T& pick_uniform(const std::array<T, N>& options, Rng& rng) {
  return options[rng.below(N)];
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::string description(double text_risk, int phrases, Rng& rng) {
  std::string out;
  // A few rows carry no usable text: blank, or only the web form prompt.
  const double blank = rng.uniform();
  if (blank < 0.02) return "";
  if (blank < 0.04) return rng.bernoulli(0.5) ? "Tell your story. What is your loan for?" : "  ";
  if (rng.bernoulli(0.6)) {
    char stamp[64];
    std::snprintf(stamp, sizeof stamp, "  Borrower added on %02d/%02d/%02d > ", static_cast<int>(rng.between(1, 12)),
                  static_cast<int>(rng.between(1, 28)), static_cast<int>(rng.between(8, 13)));
    out += stamp;
  }
  if (rng.bernoulli(0.05)) out += "Tell your story. What is your loan for? ";
  out += pick_uniform(kOpeners, rng);
  out += ' ';
  out += pick_uniform(kPurposeSentences, rng);
  out += ". ";
  const double p_risk = sigmoid(1.6 * text_risk);
  for (int k = 0; k < phrases; ++k) {
    const char* phrase = rng.bernoulli(p_risk) ? pick_uniform(kRiskPhrases, rng) : pick_uniform(kSafePhrases, rng);
    std::string s = phrase;
    s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    out += s;
    out += rng.bernoulli(0.15) ? ".<br>" : ". ";
  }
  if (rng.bernoulli(0.3)) out += "Thanks!";
  return out;
}

}  // namespace

void write_synthetic_csv(std::ostream& out, const SynthOptions& o) {
  csv::write_row(out, {"id", "annual_inc", "dti", "loan_amnt", "fico_range_low", "fico_range_high", "emp_length",
                       "purpose", "home_ownership", "addr_state", "desc", "loan_status", "member_note"});
  for (std::size_t i = 0; i < o.rows; ++i) {
    Rng rng = Rng::stream(o.seed, Stream::synth, {i});
    const double tab = rng.normal();
    const double text = rng.normal();

    char id[16];
    std::snprintf(id, sizeof id, "S%05zu", i + 1);
    const double fico_raw = std::clamp(712.0 - 22.0 * tab + 14.0 * rng.normal(), 660.0, 845.0);
    const double fico_low = 5.0 * std::floor(fico_raw / 5.0);
    const double revenue = 100.0 * std::round(std::exp(11.0 + 0.45 * rng.normal() - 0.12 * tab) / 100.0);
    const double loan = 25.0 * std::round(std::clamp(std::exp(9.3 + 0.55 * rng.normal() + 0.08 * tab), 1000.0, 35000.0) / 25.0);
    const double dti = std::round(std::clamp(15.0 + 4.0 * tab + 6.0 * rng.normal(), 0.0, 34.99) * 100.0) / 100.0;
    const char* emp = pick(kEmployment, rng);
    const char* purpose = pick(kPurposes, rng);
    const char* home = pick(kHome, rng);
    const char* state = pick_uniform(kStates, rng);
    const std::string desc = description(text, o.signal_phrases, rng);
    const bool defaulted = rng.bernoulli(sigmoid(o.intercept + o.tabular_effect * tab + o.text_effect * text));

    csv::write_row(out, {id, format_double(revenue), format_double(dti), format_double(loan), format_double(fico_low),
                         format_double(fico_low + 4), emp, purpose, home, state, desc,
                         defaulted ? "Charged Off" : "Fully Paid", ""});
  }
}

}  // namespace textrisk::pipeline
