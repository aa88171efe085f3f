#pragma once

// Caption-level object hallucination metrics.
//
// Normalization: lowercase, split on non-alphanumerics, singularize each
// token, then scan left to right matching the longest known phrase
// (compounds, multiword synonyms, multiword objects) before single words.

#include "halsub/common.hpp"
#include "halsub/confusion.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace halsub {

inline std::vector<std::string> tokenize_caption(const std::string& caption)
{
    std::vector<std::string> tokens;
    std::string cur;
    for (unsigned char ch : caption) {
        if (std::isalnum(ch)) {
            cur.push_back(static_cast<char>(std::tolower(ch)));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

/// Rule-based singular form of a lowercase word.
inline std::string singularize(const std::string& word)
{
    static const std::unordered_map<std::string, std::string> kIrregular = {
        {"people", "person"}, {"men", "man"},       {"women", "woman"},   {"children", "child"},
        {"mice", "mouse"},    {"geese", "goose"},   {"feet", "foot"},     {"teeth", "tooth"},
        {"knives", "knife"},  {"wives", "wife"},    {"leaves", "leaf"},   {"shelves", "shelf"},
        {"loaves", "loaf"},   {"buses", "bus"},     {"cookies", "cookie"}, {"ties", "tie"},
        {"movies", "movie"},  {"pies", "pie"},      {"brownies", "brownie"}, {"oxen", "ox"},
    };
    static const std::set<std::string> kInvariant = {
        "glasses", "scissors", "pants", "jeans", "shorts", "sheep", "fish",  "deer",  "series",
        "species", "news",     "tennis", "this",  "his",   "was",   "has",   "as",
        "is",      "its",      "yes",   "us",     "always", "perhaps", "across", "various",
    };
    if (auto it = kIrregular.find(word); it != kIrregular.end()) return it->second;
    if (kInvariant.count(word)) return word;
    const auto ends = [&](const char* suffix) {
        const std::string s(suffix);
        return word.size() > s.size() && word.compare(word.size() - s.size(), s.size(), s) == 0;
    };
    if (word.size() <= 3) return word;
    if (ends("ss") || ends("us") || ends("is")) return word;
    if (ends("ies")) return word.substr(0, word.size() - 3) + "y";
    if (ends("ches") || ends("shes") || ends("xes") || ends("zes") || ends("sses"))
        return word.substr(0, word.size() - 2);
    if (ends("s")) return word.substr(0, word.size() - 1);
    return word;
}

inline std::vector<std::string> normalize_phrase(const std::string& phrase)
{
    auto tokens = tokenize_caption(phrase);
    for (auto& t : tokens) t = singularize(t);
    return tokens;
}

class ObjectLexicon {
public:
    ObjectLexicon() = default;

    ObjectLexicon(std::set<std::string> objects, std::map<std::string, std::string> synonyms,
                  std::map<std::string, std::string> compounds)
        : objects_(std::move(objects)), synonyms_(std::move(synonyms)), compounds_(std::move(compounds))
    {
        for (const auto& o : objects_) add_phrase(o, o);
        for (const auto& [surface, canonical] : synonyms_) {
            require(objects_.count(canonical) == 1, "lexicon: synonym '" + surface + "' maps to unknown object '" + canonical + "'");
            add_phrase(surface, canonical);
        }
        for (const auto& [phrase, canonical] : compounds_) {
            require(objects_.count(canonical) == 1, "lexicon: compound '" + phrase + "' maps to unknown object '" + canonical + "'");
            add_phrase(phrase, canonical);
        }
    }

    /// {"objects": [...], "synonyms": {surface: canonical}, "compounds": {phrase: canonical}}
    static ObjectLexicon from_json(const nlohmann::json& j)
    {
        require(j.is_object() && j.contains("objects"), "lexicon: expected an object with an 'objects' array");
        for (auto it = j.begin(); it != j.end(); ++it)
            require(it.key() == "objects" || it.key() == "synonyms" || it.key() == "compounds",
                    "lexicon: unknown field '" + it.key() + "'");
        try {
            auto objects = j.at("objects").get<std::set<std::string>>();
            std::map<std::string, std::string> synonyms, compounds;
            if (j.contains("synonyms")) synonyms = j.at("synonyms").get<std::map<std::string, std::string>>();
            if (j.contains("compounds")) compounds = j.at("compounds").get<std::map<std::string, std::string>>();
            return ObjectLexicon(std::move(objects), std::move(synonyms), std::move(compounds));
        } catch (const nlohmann::json::exception& e) {
            throw InvalidInput(std::string("lexicon: ") + e.what());
        }
    }

    const std::set<std::string>& objects() const { return objects_; }

    /// Canonical objects mentioned in a caption (each at most once).
    std::set<std::string> mentions(const std::string& caption) const
    {
        std::set<std::string> found;
        const auto tokens = normalize_phrase(caption);
        std::size_t i = 0;
        while (i < tokens.size()) {
            bool matched = false;
            for (std::size_t len = std::min(max_len_, tokens.size() - i); len >= 1; --len) {
                const std::vector<std::string> key(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                                   tokens.begin() + static_cast<std::ptrdiff_t>(i + len));
                if (auto it = phrases_.find(key); it != phrases_.end()) {
                    found.insert(it->second);
                    i += len;
                    matched = true;
                    break;
                }
            }
            if (!matched) ++i;
        }
        return found;
    }

    /// Canonical form of an object name (synonyms resolved); unknown names pass through.
    std::string canonical(const std::string& name) const
    {
        if (auto it = phrases_.find(normalize_phrase(name)); it != phrases_.end()) return it->second;
        return name;
    }

private:
    void add_phrase(const std::string& phrase, const std::string& canonical)
    {
        auto key = normalize_phrase(phrase);
        require(!key.empty(), "lexicon: empty phrase");
        max_len_ = std::max(max_len_, key.size());
        phrases_[std::move(key)] = canonical;
    }

    std::set<std::string> objects_;
    std::map<std::string, std::string> synonyms_;
    std::map<std::string, std::string> compounds_;
    std::map<std::vector<std::string>, std::string> phrases_;
    std::size_t max_len_ = 1;
};

struct ChairCounts {
    std::int64_t sentences = 0;
    std::int64_t hallucinated_sentences = 0;
    std::int64_t mentions = 0;
    std::int64_t hallucinated_mentions = 0;
};

struct ChairResult {
    double chair_s = 0.0;
    double chair_i = 0.0;
    ChairCounts counts;
    bool no_sentences = false;  // chair_s reported as 0
    bool no_mentions = false;   // chair_i reported as 0
};

inline ChairResult chair_scores(const std::vector<std::string>& captions,
                                const std::vector<std::set<std::string>>& gt_objects, const ObjectLexicon& lexicon)
{
    require(captions.size() == gt_objects.size(), "chair: " + std::to_string(captions.size()) + " captions but " +
                                                      std::to_string(gt_objects.size()) + " ground-truth sets");
    ChairResult r;
    for (std::size_t i = 0; i < captions.size(); ++i) {
        std::set<std::string> gt;
        for (const auto& o : gt_objects[i]) gt.insert(lexicon.canonical(o));
        const auto mentioned = lexicon.mentions(captions[i]);
        std::int64_t bad = 0;
        for (const auto& m : mentioned)
            if (!gt.count(m)) ++bad;
        r.counts.sentences += 1;
        r.counts.mentions += static_cast<std::int64_t>(mentioned.size());
        r.counts.hallucinated_mentions += bad;
        if (bad > 0) r.counts.hallucinated_sentences += 1;
    }
    r.no_sentences = r.counts.sentences == 0;
    r.no_mentions = r.counts.mentions == 0;
    if (!r.no_sentences)
        r.chair_s = static_cast<double>(r.counts.hallucinated_sentences) / static_cast<double>(r.counts.sentences);
    if (!r.no_mentions)
        r.chair_i = static_cast<double>(r.counts.hallucinated_mentions) / static_cast<double>(r.counts.mentions);
    return r;
}

/// Offline polling: each polled object is a binary presence question.
/// Positive class = object present in the ground truth; predicted positive =
/// object mentioned in the caption. A mentioned absent object is a false
/// positive (a hallucination).
inline Confusion opope_poll(const std::string& caption, const std::vector<std::string>& polled_objects,
                            const std::set<std::string>& gt_objects, const ObjectLexicon& lexicon)
{
    require(!polled_objects.empty(), "opope: polled object list must be non-empty");
    std::set<std::string> gt;
    for (const auto& o : gt_objects) gt.insert(lexicon.canonical(o));
    const auto mentioned = lexicon.mentions(caption);
    Confusion c;
    for (const auto& raw : polled_objects) {
        const auto obj = lexicon.canonical(raw);
        const bool present = gt.count(obj) == 1;
        const bool predicted = mentioned.count(obj) == 1;
        if (present) (predicted ? c.tp : c.fn)++;
        else (predicted ? c.fp : c.tn)++;
    }
    return c;
}

/// (1 + b^2) p r / (b^2 p + r); 0 when the denominator vanishes.
inline double fbeta(double precision, double recall, double beta)
{
    require(precision >= 0.0 && precision <= 1.0, "fbeta: precision must be in [0, 1]");
    require(recall >= 0.0 && recall <= 1.0, "fbeta: recall must be in [0, 1]");
    require(std::isfinite(beta) && beta > 0.0, "fbeta: beta must be > 0");
    const double b2 = beta * beta;
    const double den = b2 * precision + recall;
    if (den == 0.0) return 0.0;
    return (1.0 + b2) * precision * recall / den;
}

} // namespace halsub
