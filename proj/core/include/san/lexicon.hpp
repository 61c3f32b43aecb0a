#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "san/ops.hpp"
#include "san/params.hpp"

namespace san {

// Token with externally produced annotations. pos_id/ner_id index the fixed
// tag inventories below; 0 is the unknown tag.
struct AnnotatedToken {
    std::string text;
    std::string lemma;
    int pos_id = 0;
    int ner_id = 0;
};

// Word vocabulary with fixed special rows PAD=0 and UNK=1.
class Vocab {
public:
    static constexpr int pad_id = 0;
    static constexpr int unk_id = 1;

    Vocab();

    // Returns the existing or freshly assigned id.
    int add(const std::string& token);
    // UNK for tokens never added.
    int id(const std::string& token) const;
    const std::string& token(std::size_t id) const;
    std::size_t size() const { return tokens_.size(); }

    const std::vector<std::string>& tokens() const { return tokens_; }
    static Vocab from_tokens(const std::vector<std::string>& tokens);

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

// Treebank-style POS inventory (56 tags) and OntoNotes entity inventory
// (18 types). Id 0 is reserved for unknown tags in both tables, so the
// embedding tables have 57 and 19 rows.
const std::vector<std::string>& pos_tag_inventory();
const std::vector<std::string>& ner_tag_inventory();
int pos_tag_id(std::string_view tag);  // 0 when unknown
int ner_tag_id(std::string_view tag);

inline constexpr std::size_t kPosVocab = 57;
inline constexpr std::size_t kNerVocab = 19;

std::string ascii_lower(std::string_view s);

struct EmbeddingSet {
    Tensor word_table;  // [V x emb]
    Tensor pos_table;   // [57 x pos_dim]
    Tensor ner_table;   // [19 x ner_dim]
    Tensor align_w0;    // [align_dim x emb]
};

// Tables are Gaussian(0, 0.1) with row 0 zeroed and frozen (it doubles as the
// padding row).
EmbeddingSet make_embedding_set(Graph& g, ParamSet& ps, Rng& rng,
                                std::size_t vocab_size, std::size_t emb_dim,
                                std::size_t pos_dim, std::size_t ner_dim,
                                std::size_t align_dim);

// Three binary flags per passage token: original-form, lowercase, and lemma
// match against any question token. Row-major [3][n].
std::vector<double> exact_match_features(
    std::span<const AnnotatedToken> passage,
    std::span<const AnnotatedToken> question);

// Soft-alignment feature: per passage token, the attention-weighted mixture
// of transformed question embeddings, with attention over question tokens
// [0, valid_m). Output is [align_dim x n].
Tensor align_features(Graph& g, const Tensor& passage_emb,
                      const Tensor& question_emb, const Tensor& align_w0,
                      std::size_t valid_m);

// Low-level encode over already-mapped ids; widths may exceed the valid
// lengths (padded tails use PAD ids and zero match features).
std::pair<Tensor, Tensor> lexicon_encode(
    Graph& g, const EmbeddingSet& emb, std::span<const int> p_words,
    std::span<const int> p_pos, std::span<const int> p_ner,
    std::span<const double> p_match, std::span<const int> q_words,
    std::size_t valid_m);

// Full feature build from annotated tokens: passage vector is the row-concat
// of word / POS / NER / exact-match / alignment features, question vector is
// the word embedding alone.
std::pair<Tensor, Tensor> build_lexicon_vectors(
    Graph& g, std::span<const AnnotatedToken> passage,
    std::span<const AnnotatedToken> question, const Vocab& vocab,
    const EmbeddingSet& emb);

// Reads "token v1 .. vE" lines, initializes matching vocab rows, and freezes
// them. Returns the number of rows initialized. Row count mismatches raise
// ParseError with the offending line number.
std::size_t apply_embedding_file(const std::string& path, const Vocab& vocab,
                                 ParamSet& ps,
                                 const std::string& param_name = "emb.word");

}  // namespace san
