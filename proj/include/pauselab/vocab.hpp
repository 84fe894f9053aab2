#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "pauselab/tokens.hpp"

namespace pauselab {

/// Immutable surface-token vocabulary. Specials occupy the first four ids;
/// the task alphabet follows in sorted order.
class Vocab {
   public:
    Vocab() = default;

    /// Throws std::invalid_argument if the alphabet is empty or collides
    /// with a reserved special spelling.
    static Vocab build(std::vector<std::string> alphabet);

    int size() const { return static_cast<int>(id_to_token_.size()); }
    const std::string& surface(TokenId id) const { return id_to_token_.at(static_cast<std::size_t>(id)); }
    bool is_special(TokenId id) const { return id >= 0 && id < kNumSpecialTokens; }
    bool is_whitespace(TokenId id) const;

    /// Longest-match segmentation. Throws std::invalid_argument naming the
    /// unknown fragment if the text cannot be segmented.
    std::vector<TokenId> encode(const std::string& text) const;

    std::string decode(const std::vector<TokenId>& ids, bool strip_special) const;

    /// Ordered token list, round-trippable through from_json_tokens.
    std::vector<std::string> token_list() const { return id_to_token_; }
    static Vocab from_token_list(std::vector<std::string> tokens);

    void save_json(const std::string& path) const;
    static Vocab load_json(const std::string& path);

    bool operator==(const Vocab& other) const { return id_to_token_ == other.id_to_token_; }

   private:
    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, TokenId> token_to_id_;
    std::size_t max_surface_len_ = 0;

    void index_tokens();
};

}  // namespace pauselab
