#include "gaapo/synthetic_oracle.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <memory>

#include "gaapo/rng.hpp"
#include "gaapo/text.hpp"

namespace gaapo {

namespace {

constexpr std::string_view kExampleOutputMarker = "\nOutput:";

constexpr std::array<std::string_view, 8> kNeutralEdits{
    "Be precise.",
    "Read the message twice before answering.",
    "Focus on what the text actually says.",
    "Consider the intent of the author.",
    "Use only the listed categories.",
    "Avoid guessing when the evidence is weak.",
    "State your conclusion clearly.",
    "Keep the reasoning short.",
};

/// Content of the last <tag>...</tag> block, trimmed.
std::optional<std::string> last_block(std::string_view text, std::string_view tag) {
    const std::string open = "<" + std::string(tag) + ">";
    const std::string close = "</" + std::string(tag) + ">";
    const auto start = text.rfind(open);
    if (start == std::string_view::npos) return std::nullopt;
    const auto body = start + open.size();
    const auto end = text.find(close, body);
    if (end == std::string_view::npos) return std::nullopt;
    return std::string(text::trim(text.substr(body, end - body)));
}

}  // namespace

double SyntheticOracleConfig::optimum() const {
    return std::min(1.0, base_probability + keyword_increment * static_cast<double>(keywords.size()));
}

void to_json(Json& j, const SyntheticOracleConfig& c) {
    j = Json{{"keywords", c.keywords},
             {"base_probability", c.base_probability},
             {"keyword_increment", c.keyword_increment},
             {"injection_probability", c.injection_probability},
             {"drop_placeholder_probability", c.drop_placeholder_probability},
             {"seed", c.seed}};
}

void from_json(const Json& j, SyntheticOracleConfig& c) {
    const SyntheticOracleConfig d;
    c.keywords = j.value("keywords", d.keywords);
    c.base_probability = j.value("base_probability", d.base_probability);
    c.keyword_increment = j.value("keyword_increment", d.keyword_increment);
    c.injection_probability = j.value("injection_probability", d.injection_probability);
    c.drop_placeholder_probability = j.value("drop_placeholder_probability", d.drop_placeholder_probability);
    c.seed = j.value("seed", d.seed);
}

std::uint64_t request_hash64(const CompletionRequest& request) {
    const auto hex = canonical_request_hash(request);
    return std::stoull(hex.substr(0, 16), nullptr, 16);
}

SyntheticOracle::SyntheticOracle(SyntheticOracleConfig config, TaskSpec task, std::vector<Sample> samples)
    : config_(std::move(config)), task_(std::move(task)), samples_(std::move(samples)) {
    if (samples_.empty()) return;
    std::size_t shortest = samples_.front().input.size();
    for (const auto& s : samples_) shortest = std::min(shortest, s.input.size());
    prefix_len_ = std::clamp<std::size_t>(shortest, 1, 16);
    for (std::size_t i = 0; i < samples_.size(); ++i)
        by_prefix_[samples_[i].input.substr(0, prefix_len_)].push_back(i);
}

std::size_t SyntheticOracle::keyword_count(std::string_view prompt_text) const {
    return static_cast<std::size_t>(std::count_if(config_.keywords.begin(), config_.keywords.end(),
                                                  [&](const std::string& k) { return text::contains_word(prompt_text, k); }));
}

double SyntheticOracle::success_probability(std::string_view prompt_text) const {
    return std::min(1.0, config_.base_probability +
                             config_.keyword_increment * static_cast<double>(keyword_count(prompt_text)));
}

std::optional<std::size_t> SyntheticOracle::find_query_sample(std::string_view text) const {
    if (prefix_len_ == 0 || text.size() < prefix_len_) return std::nullopt;
    for (std::size_t pos = 0; pos + prefix_len_ <= text.size(); ++pos) {
        const auto it = by_prefix_.find(std::string(text.substr(pos, prefix_len_)));
        if (it == by_prefix_.end()) continue;
        // Longest match first so an input that prefixes another does not shadow it.
        std::optional<std::size_t> best;
        for (const auto idx : it->second) {
            const auto& input = samples_[idx].input;
            if (text.substr(pos, input.size()) != input) continue;
            if (!best || input.size() > samples_[*best].input.size()) best = idx;
        }
        if (!best) continue;
        const auto after = pos + samples_[*best].input.size();
        if (text.substr(after, kExampleOutputMarker.size()) == kExampleOutputMarker) continue;
        return best;
    }
    return std::nullopt;
}

std::string SyntheticOracle::wrong_answer(const GoldAnswer& gold) const {
    if (const auto* labels = std::get_if<LabelSet>(&gold)) {
        const auto& vocab = *task_.label_vocabulary;
        LabelSet wrong = *labels;
        const auto missing = std::find_if(vocab.begin(), vocab.end(), [&](const auto& l) { return !labels->count(l); });
        if (missing != vocab.end())
            wrong.insert(*missing);
        else
            wrong.erase(wrong.begin());
        return render_gold(wrong);
    }
    const auto& value = std::get<Choice>(gold).value;
    if (value.size() == 1 && std::isupper(static_cast<unsigned char>(value[0])))
        return std::string(1, static_cast<char>('A' + (value[0] - 'A' + 1) % 4));
    return value + " (not)";
}

std::string SyntheticOracle::predict(const CompletionRequest& request, std::uint64_t draw_seed) const {
    const auto& text = request.user_text();
    const auto idx = find_query_sample(text);
    if (!idx) return "I could not find the message to classify.\nANSWER: none";
    // Keywords only count when they come from the prompt, not from the input.
    std::string prompt_part = text;
    if (const auto pos = prompt_part.find(samples_[*idx].input); pos != std::string::npos)
        prompt_part.erase(pos, samples_[*idx].input.size());
    Rng rng(draw_seed);
    const bool correct = rng.bernoulli(success_probability(prompt_part));
    const auto& gold = samples_[*idx].gold;
    return "Considered the message.\nANSWER: " + (correct ? render_gold(gold) : wrong_answer(gold));
}

std::string SyntheticOracle::rewrite(const CompletionRequest& request, std::uint64_t draw_seed) const {
    const auto& text = request.user_text();
    if (text.find("<errors>") != std::string::npos)
        return "<reasons>\n1. The prompt does not ask for a careful reading of the input.\n"
               "2. The prompt does not say how to decide between close categories.\n</reasons>";
    auto parent = last_block(text, "prompt");
    if (!parent || parent->empty()) return "";

    Rng rng(draw_seed);
    std::string child = *parent;
    std::vector<std::string_view> missing;
    for (const auto& k : config_.keywords)
        if (!text::contains_word(child, k)) missing.emplace_back(k);
    if (!missing.empty() && rng.bernoulli(config_.injection_probability)) {
        const auto kw = missing[rng.uniform_index(missing.size())];
        child += "\nApproach the task " + std::string(kw) + ".";
    } else {
        child += "\n" + std::string(kNeutralEdits[rng.uniform_index(kNeutralEdits.size())]);
    }
    if (rng.bernoulli(config_.drop_placeholder_probability)) {
        if (const auto pos = child.find(kPlaceholder); pos != std::string::npos)
            child.replace(pos, kPlaceholder.size(), "the message");
    }
    return "<prompt>\n" + child + "\n</prompt>";
}

std::string SyntheticOracle::operator()(const CompletionRequest& request) const {
    const auto draw_seed = mix_seed(request_hash64(request) ^ mix_seed(config_.seed));
    switch (request.purpose) {
        case Purpose::Prediction: return predict(request, draw_seed);
        case Purpose::Generation: return rewrite(request, draw_seed);
        case Purpose::Judging: return letter_judge(request);
    }
    return {};
}

MockOracle SyntheticOracle::as_mock() const {
    auto shared = std::make_shared<const SyntheticOracle>(*this);
    return [shared](const CompletionRequest& r) { return (*shared)(r); };
}

std::optional<char> extract_option_letter(std::string_view raw) {
    const auto text = text::trim(raw);
    if (text.empty()) return std::nullopt;
    auto is_option = [](char c) { return c >= 'A' && c <= 'J'; };
    auto standalone_at = [&](std::string_view s, std::size_t i) {
        const bool left = i == 0 || !text::is_word_char(s[i - 1]);
        const bool right = i + 1 == s.size() || !text::is_word_char(s[i + 1]);
        return is_option(s[i]) && left && right;
    };
    if (const auto marker = text::rfind_icase(text, "ANSWER:"); marker != std::string_view::npos) {
        const auto rest = text::trim(text.substr(marker + 7));
        for (std::size_t i = 0; i < rest.size(); ++i)
            if (standalone_at(rest, i)) return rest[i];
    }
    if (is_option(text[0]) && (text.size() == 1 || !text::is_word_char(text[1]))) return text[0];
    for (std::size_t i = text.size(); i-- > 0;)
        if (standalone_at(text, i)) return text[i];
    return std::nullopt;
}

std::string letter_judge(const CompletionRequest& request) {
    const auto& text = request.user_text();
    const auto reference = last_block(text, "reference");
    const auto candidate = last_block(text, "candidate");
    if (!reference || !candidate) return "I cannot compare these.";
    const auto a = extract_option_letter(*reference);
    const auto b = extract_option_letter(*candidate);
    return (a && b && *a == *b) ? "VERDICT: YES" : "VERDICT: NO";
}

}  // namespace gaapo
