#include "pauselab/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace pauselab {

namespace {
const std::vector<std::string>& special_surfaces() {
    static const std::vector<std::string> s = {kPauseSurface, kBosSurface, kEosSurface, kPadSurface};
    return s;
}
}  // namespace

void Vocab::index_tokens() {
    token_to_id_.clear();
    max_surface_len_ = 0;
    for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
        const std::string& tok = id_to_token_[i];
        if (!token_to_id_.emplace(tok, static_cast<TokenId>(i)).second)
            throw std::invalid_argument("duplicate token surface: '" + tok + "'");
        max_surface_len_ = std::max(max_surface_len_, tok.size());
    }
}

Vocab Vocab::build(std::vector<std::string> alphabet) {
    if (alphabet.empty()) throw std::invalid_argument("alphabet must be non-empty");
    std::set<std::string> sorted;
    for (std::string& tok : alphabet) {
        if (tok.empty()) throw std::invalid_argument("alphabet contains an empty token");
        for (const std::string& sp : special_surfaces())
            if (tok == sp) throw std::invalid_argument("alphabet collides with reserved spelling '" + sp + "'");
        sorted.insert(std::move(tok));
    }
    Vocab v;
    v.id_to_token_ = special_surfaces();
    v.id_to_token_.insert(v.id_to_token_.end(), sorted.begin(), sorted.end());
    v.index_tokens();
    return v;
}

Vocab Vocab::from_token_list(std::vector<std::string> tokens) {
    if (static_cast<int>(tokens.size()) < kNumSpecialTokens)
        throw std::invalid_argument("token list too short for reserved specials");
    for (int i = 0; i < kNumSpecialTokens; ++i)
        if (tokens[static_cast<std::size_t>(i)] != special_surfaces()[static_cast<std::size_t>(i)])
            throw std::invalid_argument("token list does not start with the reserved specials");
    Vocab v;
    v.id_to_token_ = std::move(tokens);
    v.index_tokens();
    return v;
}

bool Vocab::is_whitespace(TokenId id) const {
    const std::string& s = surface(id);
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

std::vector<TokenId> Vocab::encode(const std::string& text) const {
    std::vector<TokenId> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t longest = std::min(max_surface_len_, text.size() - pos);
        TokenId match = -1;
        std::size_t match_len = 0;
        for (std::size_t len = longest; len >= 1; --len) {
            auto it = token_to_id_.find(text.substr(pos, len));
            if (it != token_to_id_.end() && !is_special(it->second)) {
                match = it->second;
                match_len = len;
                break;
            }
        }
        if (match < 0) {
            const std::string fragment = text.substr(pos, std::min<std::size_t>(8, text.size() - pos));
            throw std::invalid_argument("cannot encode text at offset " + std::to_string(pos) +
                                        ": unknown fragment '" + fragment + "'");
        }
        out.push_back(match);
        pos += match_len;
    }
    return out;
}

std::string Vocab::decode(const std::vector<TokenId>& ids, bool strip_special) const {
    std::string out;
    for (TokenId id : ids) {
        if (id < 0 || id >= size()) throw std::invalid_argument("token id out of range: " + std::to_string(id));
        if (strip_special && is_special(id)) continue;
        out += surface(id);
    }
    return out;
}

void Vocab::save_json(const std::string& path) const {
    nlohmann::json j;
    j["tokens"] = id_to_token_;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open vocab file for writing: " + path);
    out << j.dump(2) << "\n";
}

Vocab Vocab::load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open vocab file: " + path);
    nlohmann::json j;
    in >> j;
    return from_token_list(j.at("tokens").get<std::vector<std::string>>());
}

}  // namespace pauselab
