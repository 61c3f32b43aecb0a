#include "san/lexicon.hpp"

#include <fstream>
#include <sstream>

#include "san/layers.hpp"
#include "san/log.hpp"

namespace san {

Vocab::Vocab() {
    tokens_ = {"<pad>", "<unk>"};
    index_["<pad>"] = pad_id;
    index_["<unk>"] = unk_id;
}

int Vocab::add(const std::string& token) {
    auto it = index_.find(token);
    if (it != index_.end()) return it->second;
    const int id = static_cast<int>(tokens_.size());
    tokens_.push_back(token);
    index_.emplace(token, id);
    return id;
}

int Vocab::id(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? unk_id : it->second;
}

const std::string& Vocab::token(std::size_t id) const {
    return tokens_.at(id);
}

Vocab Vocab::from_tokens(const std::vector<std::string>& tokens) {
    Vocab v;
    if (tokens.size() < 2 || tokens[0] != "<pad>" || tokens[1] != "<unk>")
        throw DataError("vocab: token list must start with <pad>, <unk>");
    for (std::size_t i = 2; i < tokens.size(); ++i) v.add(tokens[i]);
    if (v.size() != tokens.size())
        throw DataError("vocab: duplicate tokens in list");
    return v;
}

const std::vector<std::string>& pos_tag_inventory() {
    static const std::vector<std::string> tags = {
        "$",    "''",    ",",     "-LRB-", "-RRB-", ".",    ":",    "ADD",
        "AFX",  "BES",   "CC",    "CD",    "DT",    "EX",   "FW",   "GW",
        "HVS",  "HYPH",  "IN",    "JJ",    "JJR",   "JJS",  "LS",   "MD",
        "NFP",  "NIL",   "NN",    "NNP",   "NNPS",  "NNS",  "PDT",  "POS",
        "PRP",  "PRP$",  "RB",    "RBR",   "RBS",   "RP",   "SP",   "SYM",
        "TO",   "UH",    "VB",    "VBD",   "VBG",   "VBN",  "VBP",  "VBZ",
        "WDT",  "WP",    "WP$",   "WRB",   "XX",    "``",   "_SP",  "-NONE-"};
    return tags;
}

const std::vector<std::string>& ner_tag_inventory() {
    static const std::vector<std::string> tags = {
        "PERSON",   "NORP",    "FAC",      "ORG",      "GPE",     "LOC",
        "PRODUCT",  "EVENT",   "WORK_OF_ART", "LAW",   "LANGUAGE", "DATE",
        "TIME",     "PERCENT", "MONEY",    "QUANTITY", "ORDINAL", "CARDINAL"};
    return tags;
}

namespace {

const std::unordered_map<std::string, int>& tag_index(
    const std::vector<std::string>& inventory) {
    static std::unordered_map<const std::vector<std::string>*,
                              std::unordered_map<std::string, int>>
        cache;
    auto& m = cache[&inventory];
    if (m.empty())
        for (std::size_t i = 0; i < inventory.size(); ++i)
            m[inventory[i]] = static_cast<int>(i) + 1;
    return m;
}

}  // namespace

int pos_tag_id(std::string_view tag) {
    const auto& m = tag_index(pos_tag_inventory());
    auto it = m.find(std::string(tag));
    return it == m.end() ? 0 : it->second;
}

int ner_tag_id(std::string_view tag) {
    const auto& m = tag_index(ner_tag_inventory());
    auto it = m.find(std::string(tag));
    return it == m.end() ? 0 : it->second;
}

std::string ascii_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
}

EmbeddingSet make_embedding_set(Graph& g, ParamSet& ps, Rng& rng,
                                std::size_t vocab_size, std::size_t emb_dim,
                                std::size_t pos_dim, std::size_t ner_dim,
                                std::size_t align_dim) {
    auto gaussian_table = [&](const std::string& name, std::size_t rows,
                              std::size_t cols) {
        std::vector<double> v(rows * cols);
        for (auto& x : v) x = rng.normal(0.0, 0.1);
        for (std::size_t c = 0; c < cols; ++c) v[c] = 0.0;  // padding row
        Tensor t = ps.add(name, g.leaf({rows, cols}, std::move(v), true));
        std::vector<std::uint8_t> frozen(rows, 0);
        frozen[0] = 1;
        ps.set_frozen_rows(name, std::move(frozen));
        return t;
    };

    EmbeddingSet e;
    e.word_table = gaussian_table("emb.word", vocab_size, emb_dim);
    e.pos_table = gaussian_table("emb.pos", kPosVocab, pos_dim);
    e.ner_table = gaussian_table("emb.ner", kNerVocab, ner_dim);
    e.align_w0 = ps.add("emb.align_w0",
                        init_uniform(g, rng, {align_dim, emb_dim}, emb_dim));
    return e;
}

std::vector<double> exact_match_features(
    std::span<const AnnotatedToken> passage,
    std::span<const AnnotatedToken> question) {
    if (passage.empty() || question.empty())
        throw ContractError("exact_match: empty token sequence");
    const std::size_t n = passage.size();
    std::vector<double> out(3 * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::string lower = ascii_lower(passage[i].text);
        for (const auto& q : question) {
            if (passage[i].text == q.text) out[i] = 1.0;
            if (lower == ascii_lower(q.text)) out[n + i] = 1.0;
            if (!passage[i].lemma.empty() && passage[i].lemma == q.lemma)
                out[2 * n + i] = 1.0;
        }
    }
    return out;
}

Tensor align_features(Graph& g, const Tensor& passage_emb,
                      const Tensor& question_emb, const Tensor& align_w0,
                      std::size_t valid_m) {
    Tensor gp = relu(g, matmul(g, align_w0, passage_emb));   // [a x n]
    Tensor gq = relu(g, matmul(g, align_w0, question_emb));  // [a x m]
    Tensor scores = matmul(g, transpose(g, gq), gp);         // [m x n]
    Tensor gamma = softmax_masked(g, scores, 0, valid_m);
    return matmul(g, gq, gamma);                             // [a x n]
}

std::pair<Tensor, Tensor> lexicon_encode(
    Graph& g, const EmbeddingSet& emb, std::span<const int> p_words,
    std::span<const int> p_pos, std::span<const int> p_ner,
    std::span<const double> p_match, std::span<const int> q_words,
    std::size_t valid_m) {
    const std::size_t n = p_words.size();
    if (p_match.size() != 3 * n)
        throw DimensionError("lexicon: match features must be 3 x n");

    Tensor pw = embedding_cols(g, emb.word_table, p_words);
    Tensor pp = embedding_cols(g, emb.pos_table, p_pos);
    Tensor pn = embedding_cols(g, emb.ner_table, p_ner);
    Tensor qw = embedding_cols(g, emb.word_table, q_words);

    Tensor match = g.constant({3, n},
                              std::vector<double>(p_match.begin(),
                                                  p_match.end()));
    Tensor falign = align_features(g, pw, qw, emb.align_w0, valid_m);

    Tensor passage_vec = concat(g, {pw, pp, pn, match, falign}, 0);
    return {passage_vec, qw};
}

std::pair<Tensor, Tensor> build_lexicon_vectors(
    Graph& g, std::span<const AnnotatedToken> passage,
    std::span<const AnnotatedToken> question, const Vocab& vocab,
    const EmbeddingSet& emb) {
    auto ids_of = [&](std::span<const AnnotatedToken> toks) {
        std::vector<int> words, pos, ner;
        words.reserve(toks.size());
        for (const auto& t : toks) {
            words.push_back(vocab.id(t.text));
            pos.push_back(t.pos_id);
            ner.push_back(t.ner_id);
        }
        return std::tuple{words, pos, ner};
    };
    auto [pw, pp, pn] = ids_of(passage);
    auto [qw, qp, qn] = ids_of(question);
    (void)qp;
    (void)qn;
    std::vector<double> match = exact_match_features(passage, question);
    return lexicon_encode(g, emb, pw, pp, pn, match, qw, question.size());
}

std::size_t apply_embedding_file(const std::string& path, const Vocab& vocab,
                                 ParamSet& ps,
                                 const std::string& param_name) {
    std::ifstream in(path);
    if (!in) throw DataError("embeddings: cannot read " + path);

    Tensor table = ps.get(param_name);
    const std::size_t dim = table.dim(1);
    std::vector<std::uint8_t> frozen(table.dim(0), 0);
    if (const auto* prev = ps.frozen_rows(param_name)) frozen = *prev;
    frozen[0] = 1;

    std::string line;
    std::size_t line_no = 0, matched = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string token;
        ls >> token;
        std::vector<double> vals;
        vals.reserve(dim);
        double v;
        while (ls >> v) vals.push_back(v);
        if (vals.size() != dim)
            throw ParseError(strf("embeddings %s line %zu: expected %zu "
                                  "values, got %zu",
                                  path.c_str(), line_no, dim, vals.size()));
        const int id = vocab.id(token);
        if (id <= Vocab::unk_id) continue;  // unknown or special token
        std::copy(vals.begin(), vals.end(),
                  table.value().begin() + static_cast<long>(id) *
                                              static_cast<long>(dim));
        frozen[static_cast<std::size_t>(id)] = 1;
        ++matched;
    }
    ps.set_frozen_rows(param_name, std::move(frozen));
    log_info(strf("embeddings: initialized and froze %zu rows from %s",
                  matched, path.c_str()));
    return matched;
}

}  // namespace san
