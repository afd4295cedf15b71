#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mhla/model.hpp"
#include "mhla/tasks.hpp"

namespace mhla {

/// Token layout for attribute-structured programs: each attribute owns a
/// contiguous block of embedding rows, one row per alphabet symbol, and a
/// token is the sum of one-hots of its set attributes.
struct AttributeSchema {
    struct Attribute {
        std::string name;
        std::size_t size = 0;
    };
    std::vector<Attribute> attributes;

    void validate() const {
        if (attributes.empty()) throw ContractError("AttributeSchema: no attributes");
        for (std::size_t i = 0; i < attributes.size(); ++i) {
            if (attributes[i].size == 0)
                throw ContractError("AttributeSchema: empty alphabet for '" +
                                    attributes[i].name + "'");
            for (std::size_t j = i + 1; j < attributes.size(); ++j)
                if (attributes[i].name == attributes[j].name)
                    throw ContractError("AttributeSchema: duplicate attribute '" +
                                        attributes[i].name + "'");
        }
    }
    std::size_t dim() const {
        std::size_t total = 0;
        for (const auto& a : attributes) total += a.size;
        return total;
    }
    std::size_t index_of(const std::string& name) const {
        for (std::size_t i = 0; i < attributes.size(); ++i)
            if (attributes[i].name == name) return i;
        throw ContractError("AttributeSchema: unknown attribute '" + name + "'");
    }
    bool has(const std::string& name) const {
        for (const auto& a : attributes)
            if (a.name == name) return true;
        return false;
    }
    std::size_t row_start(std::size_t attr_index) const {
        std::size_t start = 0;
        for (std::size_t i = 0; i < attr_index; ++i) start += attributes[i].size;
        return start;
    }
};

/// Per-token attribute values; absent attributes embed as zeros.
struct TokenAssignment {
    std::vector<std::optional<std::size_t>> values;

    static TokenAssignment empty(const AttributeSchema& schema) {
        TokenAssignment t;
        t.values.assign(schema.attributes.size(), std::nullopt);
        return t;
    }
    TokenAssignment& set(const AttributeSchema& schema, const std::string& attr,
                         std::size_t symbol) {
        const std::size_t i = schema.index_of(attr);
        if (symbol >= schema.attributes[i].size)
            throw ContractError("TokenAssignment: symbol out of range for '" + attr + "'");
        if (values.size() != schema.attributes.size())
            values.assign(schema.attributes.size(), std::nullopt);
        values[i] = symbol;
        return *this;
    }
    std::optional<std::size_t> get(const AttributeSchema& schema,
                                   const std::string& attr) const {
        const std::size_t i = schema.index_of(attr);
        return i < values.size() ? values[i] : std::nullopt;
    }
};

inline Vector embed_token(const AttributeSchema& schema, const TokenAssignment& token) {
    Vector v(schema.dim(), 0.0);
    if (token.values.size() != schema.attributes.size())
        throw ContractError("embed_token: token does not match schema");
    std::size_t start = 0;
    for (std::size_t i = 0; i < schema.attributes.size(); ++i) {
        if (token.values[i]) {
            if (*token.values[i] >= schema.attributes[i].size)
                throw ContractError("embed_token: symbol out of range");
            v[start + *token.values[i]] = 1.0;
        }
        start += schema.attributes[i].size;
    }
    return v;
}

inline Matrix embed_tokens(const AttributeSchema& schema,
                           const std::vector<TokenAssignment>& tokens) {
    if (tokens.empty()) throw ContractError("embed_tokens: empty context");
    Matrix z(schema.dim(), tokens.size());
    for (std::size_t j = 0; j < tokens.size(); ++j)
        z.set_col(j, embed_token(schema, tokens[j]));
    return z;
}

/// Per-attribute rounding: argmax within each attribute's row range, with the
/// attribute left absent when no entry clears the threshold (a zero block
/// means "no write happened").
inline TokenAssignment round_attributes(const AttributeSchema& schema, const Vector& v,
                                        double threshold = 0.5) {
    if (v.size() != schema.dim()) throw ContractError("round_attributes: length mismatch");
    TokenAssignment out = TokenAssignment::empty(schema);
    std::size_t start = 0;
    for (std::size_t i = 0; i < schema.attributes.size(); ++i) {
        const std::size_t size = schema.attributes[i].size;
        std::size_t best = 0;
        for (std::size_t s = 1; s < size; ++s)
            if (v[start + s] > v[start + best]) best = s;
        if (v[start + best] > threshold) out.values[i] = best;
        start += size;
    }
    return out;
}

/// One lookup over the context: build the dictionary {token.key: token.value}
/// from every token carrying the key attribute, query it with bq applied to
/// the last token's source attribute, and write bv of the result into the
/// next token's dest attribute. Duplicate keys sum their values; misses leave
/// zeros. With copy_through set the previous token's dest attribute is added
/// on top (a positional self-copy head).
struct LookupInstruction {
    std::string key, value, source, dest;
    std::vector<std::size_t> bq;  // total map: source alphabet -> key alphabet
    std::vector<std::size_t> bv;  // total map: value alphabet -> dest alphabet
    bool copy_through = false;
};

struct MhlaProgram {
    AttributeSchema schema;
    std::vector<LookupInstruction> instructions;

    void validate() const {
        schema.validate();
        for (const auto& ins : instructions) {
            const std::size_t nk = schema.attributes[schema.index_of(ins.key)].size;
            const std::size_t nv = schema.attributes[schema.index_of(ins.value)].size;
            const std::size_t ns = schema.attributes[schema.index_of(ins.source)].size;
            const std::size_t nd = schema.attributes[schema.index_of(ins.dest)].size;
            if (ins.bq.size() != ns)
                throw ContractError("LookupInstruction: bq is not total over the source");
            for (std::size_t s : ins.bq)
                if (s >= nk) throw ContractError("LookupInstruction: bq out of key range");
            if (ins.bv.size() != nv)
                throw ContractError("LookupInstruction: bv is not total over the value");
            for (std::size_t s : ins.bv)
                if (s >= nd) throw ContractError("LookupInstruction: bv out of dest range");
        }
    }
};

struct CompileOptions {
    // Two instructions writing the same dest attribute are rejected by
    // default; schedules that gate themselves through dead keys (the if-then
    // expansion does) opt in.
    bool allow_shared_dest = false;
    std::string position_attr = "pos";  // needed by copy_through heads
};

/// Lower a program to explicit head matrices over the schema's orthogonal
/// token layout: per instruction, Q carries the bq table as a source-to-key
/// block and V carries the bv table as a value-to-dest block. Attention then
/// scores 1 exactly on dictionary matches, so the compiled model reproduces
/// the interpreter sum-semantics bit for bit on embedded tokens.
inline MhlaParams compile(const MhlaProgram& program, const CompileOptions& opts = {}) {
    program.validate();
    if (program.instructions.empty())
        throw CompileError("compile: a program needs at least one instruction");
    for (std::size_t i = 0; i < program.instructions.size(); ++i)
        for (std::size_t j = i + 1; j < program.instructions.size(); ++j)
            if (!opts.allow_shared_dest &&
                program.instructions[i].dest == program.instructions[j].dest)
                throw CompileError("compile: instructions " + std::to_string(i) + " and " +
                                   std::to_string(j) + " write the same dest attribute '" +
                                   program.instructions[i].dest + "'");

    const AttributeSchema& schema = program.schema;
    const std::size_t d = schema.dim();
    MhlaParams params;
    params.dim = d;
    for (const auto& ins : program.instructions) {
        const std::size_t key_start = schema.row_start(schema.index_of(ins.key));
        const std::size_t val_start = schema.row_start(schema.index_of(ins.value));
        const std::size_t src_start = schema.row_start(schema.index_of(ins.source));
        const std::size_t dst_start = schema.row_start(schema.index_of(ins.dest));
        Head head{Matrix(d, d), Matrix(d, d)};
        for (std::size_t s = 0; s < ins.bq.size(); ++s)
            head.q(key_start + ins.bq[s], src_start + s) = 1.0;
        for (std::size_t s = 0; s < ins.bv.size(); ++s)
            head.v(dst_start + ins.bv[s], val_start + s) = 1.0;
        params.heads.push_back(std::move(head));
        if (ins.copy_through) {
            if (!schema.has(opts.position_attr))
                throw CompileError("compile: copy_through needs a '" + opts.position_attr +
                                   "' attribute");
            const std::size_t pos_idx = schema.index_of(opts.position_attr);
            const std::size_t pos_start = schema.row_start(pos_idx);
            const std::size_t pos_size = schema.attributes[pos_idx].size;
            const std::size_t dsz = schema.attributes[schema.index_of(ins.dest)].size;
            Head copy{Matrix(d, d), Matrix(d, d)};
            for (std::size_t p = 0; p < pos_size; ++p)
                copy.q(pos_start + p, pos_start + p) = 1.0;
            for (std::size_t s = 0; s < dsz; ++s)
                copy.v(dst_start + s, dst_start + s) = 1.0;
            params.heads.push_back(std::move(copy));
        }
    }
    return params;
}

/// Reference interpreter, pre-rounding: the accumulated embedding of the next
/// token. Matches forward_last on the compiled parameters exactly.
inline Vector interpret_raw(const MhlaProgram& program,
                            const std::vector<TokenAssignment>& tokens,
                            const CompileOptions& opts = {}) {
    program.validate();
    if (tokens.empty()) throw ContractError("interpret: empty context");
    const AttributeSchema& schema = program.schema;
    Vector out(schema.dim(), 0.0);
    const TokenAssignment& last = tokens.back();
    if (last.values.size() != schema.attributes.size())
        throw InputError("interpret: malformed token");

    for (const auto& ins : program.instructions) {
        const std::size_t key_idx = schema.index_of(ins.key);
        const std::size_t val_idx = schema.index_of(ins.value);
        const std::size_t src_idx = schema.index_of(ins.source);
        const std::size_t dst_idx = schema.index_of(ins.dest);
        const std::size_t dst_start = schema.row_start(dst_idx);

        const std::optional<std::size_t> src = last.values[src_idx];
        if (src) {
            const std::size_t query = ins.bq[*src];
            for (const TokenAssignment& tok : tokens) {
                if (tok.values.size() != schema.attributes.size())
                    throw InputError("interpret: malformed token");
                if (tok.values[key_idx] != query) continue;
                const std::optional<std::size_t> val = tok.values[val_idx];
                if (val) out[dst_start + ins.bv[*val]] += 1.0;
            }
        }
        if (ins.copy_through) {
            const std::size_t pos_idx = schema.index_of(opts.position_attr);
            const std::optional<std::size_t> pos = last.values[pos_idx];
            if (pos) {
                for (const TokenAssignment& tok : tokens) {
                    if (tok.values[pos_idx] != pos) continue;
                    if (tok.values[dst_idx]) out[dst_start + *tok.values[dst_idx]] += 1.0;
                }
            }
        }
    }
    return out;
}

/// Next-token assignment: interpret, then round per attribute.
inline TokenAssignment interpret(const MhlaProgram& program,
                                 const std::vector<TokenAssignment>& tokens,
                                 const CompileOptions& opts = {}) {
    return round_attributes(program.schema, interpret_raw(program, tokens, opts));
}

struct ProgramTrace {
    MhlaParams compiled;
    ComputationHistory history;
    std::vector<TokenAssignment> appended;
};

struct RunOptions {
    CompileOptions compile;
    double round_threshold = 0.5;
    bool auto_position = true;  // stamp each new token with its column index
};

/// Compile, then roll out with per-attribute rounding. When the schema has a
/// position attribute, each appended token is stamped with its column index
/// (new tokens are born with their positional embedding).
inline ProgramTrace run_program(const MhlaProgram& program,
                                const std::vector<TokenAssignment>& context,
                                std::size_t steps, const RunOptions& opts = {}) {
    ProgramTrace trace;
    trace.compiled = compile(program, opts.compile);
    const AttributeSchema& schema = program.schema;
    Matrix z = embed_tokens(schema, context);
    trace.history.steps.push_back(z);
    const bool stamp = opts.auto_position && schema.has(opts.compile.position_attr);
    const std::size_t pos_idx = stamp ? schema.index_of(opts.compile.position_attr) : 0;
    for (std::size_t t = 0; t < steps; ++t) {
        const Vector y = forward_last(trace.compiled, z);
        TokenAssignment tok = round_attributes(schema, y, opts.round_threshold);
        if (stamp) {
            const std::size_t pos = z.cols();
            if (pos >= schema.attributes[pos_idx].size)
                throw ContractError("run_program: ran out of position symbols");
            tok.values[pos_idx] = pos;
        }
        z = append_column(z, embed_token(schema, tok));
        trace.history.steps.push_back(z);
        trace.appended.push_back(std::move(tok));
    }
    return trace;
}

// ---------------------------------------------------------------------------
// Program builders
// ---------------------------------------------------------------------------

inline std::vector<std::size_t> identity_map(std::size_t n) {
    std::vector<std::size_t> m(n);
    for (std::size_t i = 0; i < n; ++i) m[i] = i;
    return m;
}

/// Associative memory as a program: look the query key up among the context
/// tokens and emit the stored value. Compiles to exactly the block matrices
/// of assoc_ground_truth.
inline MhlaProgram make_assoc_program(std::size_t d) {
    MhlaProgram prog;
    prog.schema.attributes = {{"key", d}, {"value", d}};
    prog.instructions.push_back(LookupInstruction{
        "key", "value", "key", "value", identity_map(d), identity_map(d), false});
    return prog;
}

/// Copy program: every appended token receives the val attribute of the token
/// `offset` positions before it. Queries that would reach before the start
/// map to a reserved dead position symbol no token carries.
inline MhlaProgram make_copy_program(std::size_t n_positions, std::size_t n_symbols,
                                     std::size_t offset) {
    if (offset == 0) throw ContractError("make_copy_program: offset must be positive");
    MhlaProgram prog;
    const std::size_t dead = n_positions;  // one extra, never assigned to a token
    prog.schema.attributes = {{"pos", n_positions + 1}, {"val", n_symbols}};
    LookupInstruction ins;
    ins.key = "pos";
    ins.value = "val";
    ins.source = "pos";
    ins.dest = "val";
    ins.bq.resize(n_positions + 1);
    for (std::size_t p = 0; p <= n_positions; ++p)
        ins.bq[p] = (p + 1 >= offset && p + 1 - offset < n_positions) ? p + 1 - offset : dead;
    ins.bv = identity_map(n_symbols);
    prog.instructions.push_back(std::move(ins));
    return prog;
}

/// DFA execution as a single-instruction chain. The transition table is
/// serialized into context tokens keyed by a (state, step) composite derived
/// from the transition triplets: entry (s, t) stores (delta(s, w_t), t+1).
/// The rolled-out token for step t carries the composite (s_t, t), so one
/// lookup per step advances the execution.
struct DfaStepProgram {
    MhlaProgram program;
    std::vector<TokenAssignment> context;
    std::size_t steps = 0;

    /// Composite symbol for state s after t consumed letters.
    static std::size_t sp_symbol(std::size_t s, std::size_t t, std::size_t states) {
        return t * states + s;
    }
};

inline DfaStepProgram make_dfa_step_program(const AutomatonSpec& spec,
                                            const std::vector<std::size_t>& word) {
    spec.validate();
    for (std::size_t w : word)
        if (w >= spec.alphabet) throw ContractError("make_dfa_step_program: bad letter");
    const std::size_t steps = word.size();
    const std::size_t k = spec.states * (steps + 1);
    const std::size_t n_ctx = spec.states * steps + 1;
    DfaStepProgram out;
    out.steps = steps;
    out.program.schema.attributes = {
        {"pos", n_ctx + steps + 1}, {"sp", k}, {"spn", k}};
    out.program.instructions.push_back(LookupInstruction{
        "sp", "spn", "sp", "sp", identity_map(k), identity_map(k), false});

    const AttributeSchema& schema = out.program.schema;
    std::size_t pos = 0;
    for (std::size_t t = 0; t < steps; ++t)
        for (std::size_t s = 0; s < spec.states; ++s) {
            TokenAssignment tok = TokenAssignment::empty(schema);
            tok.set(schema, "pos", pos++);
            tok.set(schema, "sp", t * spec.states + s);
            tok.set(schema, "spn", (t + 1) * spec.states + spec.delta[s][word[t]]);
            out.context.push_back(std::move(tok));
        }
    TokenAssignment seed = TokenAssignment::empty(schema);
    seed.set(schema, "pos", pos);
    seed.set(schema, "sp", 0);  // start state, zero letters consumed
    out.context.push_back(std::move(seed));
    return out;
}

/// Execute the compiled chain and decode the visited states.
inline std::vector<std::size_t> dfa_step_program_states(const DfaStepProgram& prog) {
    RunOptions opts;
    opts.compile.allow_shared_dest = false;
    const ProgramTrace trace = run_program(prog.program, prog.context, prog.steps, opts);
    const AttributeSchema& schema = prog.program.schema;
    const std::size_t states =
        schema.attributes[schema.index_of("sp")].size / (prog.steps + 1);
    std::vector<std::size_t> visited{0};
    for (const TokenAssignment& tok : trace.appended) {
        const auto sp = tok.get(schema, "sp");
        if (!sp) throw NumericError("dfa_step_program_states: rollout lost the state");
        visited.push_back(*sp % states);
    }
    return visited;
}

/// If-then as a lookup macro: "if Token.x == Token.a_i then NextToken.x' =
/// Token.b_i". Expands into per-branch positional copies that stage the
/// (a_i, b_i) pairs into dummy key/value attributes over k consecutive
/// tokens, a forwarding copy for x, and a final lookup keyed on the staged
/// table. The staged copies gate themselves: only the token holding the
/// branch attributes matches the positional offset, so the shared dest
/// attributes receive zero elsewhere. Needs compile with allow_shared_dest.
///
/// Attribute requirements: "pos", query x, output x', dummies s0 (sized like
/// the a_i) and s1 (sized like the b_i); all a_i share one alphabet size, as
/// do all b_i.
struct IfThenSpec {
    std::string x, x_out;
    std::vector<std::string> branch_keys;    // a_1 .. a_k
    std::vector<std::string> branch_values;  // b_1 .. b_k
};

inline std::vector<LookupInstruction> expand_if_then(const AttributeSchema& schema,
                                                     const IfThenSpec& spec) {
    if (spec.branch_keys.size() != spec.branch_values.size() || spec.branch_keys.empty())
        throw ContractError("expand_if_then: branch lists must match and be nonempty");
    const std::size_t k = spec.branch_keys.size();
    const std::size_t pos_size = schema.attributes[schema.index_of("pos")].size;
    const std::size_t s0_size = schema.attributes[schema.index_of("s0")].size;
    const std::size_t s1_size = schema.attributes[schema.index_of("s1")].size;
    const std::size_t x_size = schema.attributes[schema.index_of(spec.x)].size;
    const std::size_t dead = pos_size - 1;  // reserved: no token carries it

    auto shift_back = [&](std::size_t by) {
        std::vector<std::size_t> bq(pos_size, dead);
        for (std::size_t p = 0; p < pos_size; ++p)
            if (p + 1 >= by && p + 1 - by < pos_size - 1) bq[p] = p + 1 - by;
        return bq;
    };

    std::vector<LookupInstruction> out;
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t ai = schema.index_of(spec.branch_keys[i]);
        const std::size_t bi = schema.index_of(spec.branch_values[i]);
        if (schema.attributes[ai].size != s0_size || schema.attributes[bi].size != s1_size)
            throw ContractError("expand_if_then: branch alphabets must match s0/s1");
        // builder i+1 sits i+1 tokens after the branch holder
        out.push_back(LookupInstruction{"pos", spec.branch_keys[i], "pos", "s0",
                                        shift_back(i + 1), identity_map(s0_size), false});
        out.push_back(LookupInstruction{"pos", spec.branch_values[i], "pos", "s1",
                                        shift_back(i + 1), identity_map(s1_size), false});
    }
    // forward the query attribute one token at a time
    out.push_back(LookupInstruction{"pos", spec.x, "pos", spec.x, shift_back(1),
                                    identity_map(x_size), false});
    // final table lookup: query x against the staged s0 -> s1 pairs
    if (x_size != s0_size) throw ContractError("expand_if_then: x and s0 sizes differ");
    out.push_back(LookupInstruction{"s0", "s1", spec.x, spec.x_out, identity_map(x_size),
                                    identity_map(s1_size), false});
    return out;
}

}  // namespace mhla
