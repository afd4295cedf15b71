#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "mhla/learner.hpp"
#include "mhla/model.hpp"
#include "mhla/rng.hpp"

namespace mhla {

// ---------------------------------------------------------------------------
// Random MHLA-realizable data
// ---------------------------------------------------------------------------

/// Ground-truth parameters with N(0, I/sqrt(d)) entries and i.i.d. Gaussian
/// contexts with N(0, I/sqrt(n_max)) entries; per-sample length uniform in
/// [1, n_max]; targets are exact model outputs, so the dataset is realizable
/// by construction.
inline std::pair<Dataset, MhlaParams> gen_random_mhla(std::size_t d, std::size_t n_max,
                                                      std::size_t n_samples,
                                                      std::size_t head_count,
                                                      std::uint64_t seed) {
    if (d == 0 || n_max == 0 || n_samples == 0 || head_count == 0)
        throw ContractError("gen_random_mhla: sizes must be positive");
    RngStream rng(seed);
    const double param_std = std::pow(static_cast<double>(d), -0.25);
    const double input_std = std::pow(static_cast<double>(n_max), -0.25);
    MhlaParams truth;
    truth.dim = d;
    for (std::size_t h = 0; h < head_count; ++h)
        truth.heads.push_back(
            Head{rng.normal_matrix(d, d, param_std), rng.normal_matrix(d, d, param_std)});
    Dataset data;
    data.samples.reserve(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
        SequenceSample s;
        s.z = rng.normal_matrix(d, 1 + rng.below(n_max), input_std);
        s.y = forward_last(truth, s.z);
        data.samples.push_back(std::move(s));
    }
    return {std::move(data), std::move(truth)};
}

// ---------------------------------------------------------------------------
// Associative memory
// ---------------------------------------------------------------------------

/// The single-head block parameters that realize key-value lookup:
/// V = [0 0; 0 I], Q = [I 0; 0 0], both 2d x 2d.
inline MhlaParams assoc_ground_truth(std::size_t d) {
    if (d == 0) throw ContractError("assoc_ground_truth: d must be positive");
    Matrix v(2 * d, 2 * d), q(2 * d, 2 * d);
    for (std::size_t i = 0; i < d; ++i) {
        v(d + i, d + i) = 1.0;
        q(i, i) = 1.0;
    }
    MhlaParams p;
    p.dim = 2 * d;
    p.heads.push_back(Head{std::move(v), std::move(q)});
    return p;
}

/// One lookup-table instance: d key/value column pairs, a query equal to one
/// of the keys, and a noise column stacked under the query.
struct AssocInstance {
    Matrix keys;    // d x d, column j = k_j
    Matrix values;  // d x d, column j = v_j
    std::size_t query_index = 0;
    Vector noise;   // length d

    /// Z = [k_1 .. k_d q ; v_1 .. v_d noise], shape 2d x (d+1).
    Matrix assemble() const {
        const std::size_t d = keys.rows();
        Matrix z(2 * d, d + 1);
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                z(i, j) = keys(i, j);
                z(d + i, j) = values(i, j);
            }
            z(i, d) = keys(i, query_index);
            z(d + i, d) = noise[i];
        }
        return z;
    }

    /// sum_j <q, k_j> v_j, the lookup read-out (bottom block of the target
    /// when the noise column is zero).
    Vector lookup_sum() const {
        const std::size_t d = keys.rows();
        Vector out(d, 0.0);
        const Vector q = keys.col(query_index);
        for (std::size_t j = 0; j < d; ++j) {
            const double w = dot(q, keys.col(j));
            for (std::size_t i = 0; i < d; ++i) out[i] += w * values(i, j);
        }
        return out;
    }
};

/// Draw one instance: Gaussian N(0, I) keys and values, or (unitary variant)
/// random orthogonal key and value matrices. The query is a uniformly chosen
/// key; the noise column is standard normal unless zeroed.
inline AssocInstance gen_assoc_instance(std::size_t d, bool unitary, RngStream& rng,
                                        bool zero_noise = false) {
    AssocInstance inst;
    if (unitary) {
        inst.keys = rng.orthogonal_matrix(d);
        inst.values = rng.orthogonal_matrix(d);
    } else {
        inst.keys = rng.normal_matrix(d, d);
        inst.values = rng.normal_matrix(d, d);
    }
    inst.query_index = static_cast<std::size_t>(rng.below(d));
    inst.noise = zero_noise ? Vector(d, 0.0) : rng.normal_vector(d);
    return inst;
}

/// Associative-memory dataset: each sample is independently unitary-type with
/// probability unitary_fraction, Gaussian-type otherwise. Targets come from
/// assoc_ground_truth, so the dataset is exactly realizable.
inline Dataset gen_assoc(std::size_t d, std::size_t n_samples, double unitary_fraction,
                         std::uint64_t seed, bool zero_noise = false) {
    if (d == 0 || n_samples == 0) throw ContractError("gen_assoc: sizes must be positive");
    if (unitary_fraction < 0.0 || unitary_fraction > 1.0)
        throw ContractError("gen_assoc: unitary_fraction outside [0,1]");
    RngStream rng(seed);
    const MhlaParams truth = assoc_ground_truth(d);
    Dataset data;
    data.samples.reserve(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
        const bool unitary = rng.uniform() < unitary_fraction;
        const AssocInstance inst = gen_assoc_instance(d, unitary, rng, zero_noise);
        SequenceSample s;
        s.z = inst.assemble();
        s.y = forward_last(truth, s.z);
        data.samples.push_back(std::move(s));
    }
    return data;
}

// ---------------------------------------------------------------------------
// DFA execution
// ---------------------------------------------------------------------------

/// Deterministic finite automaton with a total transition table and start
/// state 0. Accept/reject states are not modeled; only execution histories.
struct AutomatonSpec {
    std::size_t states = 0;
    std::size_t alphabet = 0;
    std::vector<std::vector<std::size_t>> delta;  // delta[state][letter] -> state

    void validate() const {
        if (states == 0 || alphabet == 0)
            throw ContractError("AutomatonSpec: empty state set or alphabet");
        if (delta.size() != states) throw ContractError("AutomatonSpec: delta not total");
        for (const auto& row : delta) {
            if (row.size() != alphabet) throw ContractError("AutomatonSpec: delta not total");
            for (std::size_t s : row)
                if (s >= states) throw ContractError("AutomatonSpec: transition out of range");
        }
    }
};

/// Uniformly random total transition table.
inline AutomatonSpec dfa_random(std::size_t states, std::size_t alphabet,
                                std::uint64_t seed) {
    if (states == 0 || alphabet == 0) throw ContractError("dfa_random: sizes must be positive");
    RngStream rng(seed);
    AutomatonSpec spec;
    spec.states = states;
    spec.alphabet = alphabet;
    spec.delta.assign(states, std::vector<std::size_t>(alphabet, 0));
    for (std::size_t s = 0; s < states; ++s)
        for (std::size_t w = 0; w < alphabet; ++w)
            spec.delta[s][w] = static_cast<std::size_t>(rng.below(states));
    return spec;
}

/// States visited while consuming the word: s^0 = 0, s^i = delta(s^{i-1}, w^{i-1}).
inline std::vector<std::size_t> dfa_execute(const AutomatonSpec& spec,
                                            const std::vector<std::size_t>& word) {
    spec.validate();
    std::vector<std::size_t> states_seq;
    states_seq.reserve(word.size() + 1);
    std::size_t state = 0;
    states_seq.push_back(state);
    for (std::size_t letter : word) {
        if (letter >= spec.alphabet) throw ContractError("dfa_execute: letter out of range");
        state = spec.delta[state][letter];
        states_seq.push_back(state);
    }
    return states_seq;
}

/// Token alphabet for serialized DFA sequences: states, then letters, then
/// the separators "(", ")", "|".
inline Vocabulary dfa_vocabulary(std::size_t states, std::size_t alphabet) {
    Vocabulary vocab;
    for (std::size_t s = 0; s < states; ++s) vocab.symbols.push_back("s" + std::to_string(s));
    for (std::size_t w = 0; w < alphabet; ++w) vocab.symbols.push_back("a" + std::to_string(w));
    vocab.symbols.push_back("(");
    vocab.symbols.push_back(")");
    vocab.symbols.push_back("|");
    return vocab;
}

/// One serialized sequence: transition table, word, computation history, as
/// vocabulary symbol ids. Five tokens encode each table entry and each
/// history step: "(", state, letter, next state, ")".
struct DfaSequence {
    std::vector<std::size_t> tokens;
    std::size_t prompt_end = 0;   // first history-token position
    std::size_t history_end = 0;  // == tokens.size()
    std::size_t word_len = 0;
};

inline DfaSequence dfa_sequence(const AutomatonSpec& spec,
                                const std::vector<std::size_t>& word) {
    spec.validate();
    const std::size_t state_base = 0;
    const std::size_t letter_base = spec.states;
    const std::size_t open_id = spec.states + spec.alphabet;
    const std::size_t close_id = open_id + 1;
    const std::size_t bar_id = open_id + 2;

    DfaSequence seq;
    seq.word_len = word.size();
    for (std::size_t s = 0; s < spec.states; ++s)
        for (std::size_t w = 0; w < spec.alphabet; ++w) {
            seq.tokens.push_back(open_id);
            seq.tokens.push_back(state_base + s);
            seq.tokens.push_back(letter_base + w);
            seq.tokens.push_back(state_base + spec.delta[s][w]);
            seq.tokens.push_back(close_id);
        }
    seq.tokens.push_back(bar_id);
    for (std::size_t letter : word) {
        if (letter >= spec.alphabet) throw ContractError("dfa_sequence: letter out of range");
        seq.tokens.push_back(letter_base + letter);
    }
    seq.tokens.push_back(bar_id);
    seq.prompt_end = seq.tokens.size();

    const std::vector<std::size_t> states_seq = dfa_execute(spec, word);
    for (std::size_t i = 0; i < word.size(); ++i) {
        seq.tokens.push_back(open_id);
        seq.tokens.push_back(state_base + states_seq[i]);
        seq.tokens.push_back(letter_base + word[i]);
        seq.tokens.push_back(state_base + states_seq[i + 1]);
        seq.tokens.push_back(close_id);
    }
    seq.history_end = seq.tokens.size();
    return seq;
}

/// Recover the visited states from a serialized sequence's history region.
inline std::vector<std::size_t> parse_history_states(const DfaSequence& seq) {
    std::vector<std::size_t> states_seq;
    const std::size_t steps = (seq.history_end - seq.prompt_end) / 5;
    for (std::size_t i = 0; i < steps; ++i) {
        const std::size_t base = seq.prompt_end + 5 * i;
        if (i == 0) states_seq.push_back(seq.tokens[base + 1]);
        states_seq.push_back(seq.tokens[base + 3]);
    }
    return states_seq;
}

/// Next-token dataset for DFA execution plus its token metadata. Tokens are
/// embedded as a symbol one-hot stacked on a position one-hot, so the
/// embedding dimension is vocab size + position count. Targets carry only
/// the symbol block.
struct DfaDataset {
    Dataset data;
    Vocabulary vocab;
    std::size_t positions = 0;
    std::size_t embed_dim = 0;
    std::vector<DfaSequence> sequences;
};

constexpr std::size_t kDfaPositionCap = 256;

/// One SequenceSample per history-token position of each generated sequence:
/// Z embeds the prefix, y embeds the next history token. Word letters and
/// transition tables are drawn uniformly.
inline DfaDataset gen_dfa_dataset(std::size_t states, std::size_t alphabet,
                                  std::size_t word_len, std::size_t n_sequences,
                                  std::uint64_t seed,
                                  std::size_t position_cap = kDfaPositionCap) {
    if (states == 0 || alphabet == 0 || word_len == 0 || n_sequences == 0)
        throw ContractError("gen_dfa_dataset: sizes must be positive");
    DfaDataset out;
    out.vocab = dfa_vocabulary(states, alphabet);
    const std::size_t total = 5 * states * alphabet + 1 + word_len + 1 + 5 * word_len;
    if (total > position_cap)
        throw ContractError("gen_dfa_dataset: sequence length " + std::to_string(total) +
                            " exceeds position cap " + std::to_string(position_cap));
    out.positions = total;
    out.embed_dim = out.vocab.size() + out.positions;

    RngStream rng(seed);
    for (std::size_t i = 0; i < n_sequences; ++i) {
        const AutomatonSpec spec = dfa_random(states, alphabet, rng.below(UINT64_MAX));
        std::vector<std::size_t> word(word_len);
        for (std::size_t& w : word) w = static_cast<std::size_t>(rng.below(alphabet));
        const DfaSequence seq = dfa_sequence(spec, word);

        for (std::size_t t = seq.prompt_end; t < seq.history_end; ++t) {
            SequenceSample s;
            s.z = Matrix(out.embed_dim, t);
            for (std::size_t j = 0; j < t; ++j) {
                s.z(seq.tokens[j], j) = 1.0;
                s.z(out.vocab.size() + j, j) = 1.0;
            }
            s.y = Vector(out.embed_dim, 0.0);
            s.y[seq.tokens[t]] = 1.0;
            out.data.samples.push_back(std::move(s));
        }
        out.sequences.push_back(seq);
    }
    return out;
}

/// Fraction of samples whose rounded model output hits the target token.
/// Targets must be exact one-hots. The model is contracted through its
/// flattened regressor so large head counts stay affordable.
inline double next_token_accuracy(const MhlaParams& params, const Dataset& data) {
    data.validate();
    if (data.dim() != params.dim)
        throw ContractError("next_token_accuracy: dimension mismatch");
    const std::size_t d = params.dim;
    for (const auto& s : data.samples) {
        std::size_t ones = 0;
        for (double v : s.y) {
            if (v == 1.0) ++ones;
            else if (v != 0.0) throw InputError("next_token_accuracy: target not one-hot");
        }
        if (ones != 1) throw InputError("next_token_accuracy: target not one-hot");
    }
    const Matrix t = flatten_params(params);
    std::size_t hits = 0;
    for (const auto& s : data.samples) {
        const Matrix gram = row_gram(s.z);
        const Vector last = s.z.col(s.z.cols() - 1);
        Vector yhat(d, 0.0);
        for (std::size_t a = 0; a < d; ++a) {
            double acc = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double* trow = t.data() + (a * d + j) * d * d;
                for (std::size_t k = 0; k < d; ++k) {
                    const double g = gram(j, k);
                    if (g == 0.0) continue;
                    const double* tkl = trow + k * d;
                    double inner = 0.0;
                    for (std::size_t l = 0; l < d; ++l) inner += tkl[l] * last[l];
                    acc += g * inner;
                }
            }
            yhat[a] = acc;
        }
        if (round_token(yhat) == round_token(s.y)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

}  // namespace mhla
