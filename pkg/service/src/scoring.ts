/**
 * Bag-of-words scoring: lowercase word tokens (underscores split), idf
 * weighting over the request's own documents, cosine similarity, and a
 * fixed 256-dimensional hashed term embedding. Everything is a pure
 * function of the request, so identical requests give identical answers.
 */

export const EMBED_DIMENSIONS = 256;

export function tokenize(text: string): string[] {
  const matches = text.toLowerCase().match(/[a-z0-9]+/g);
  return matches ?? [];
}

export type TermVector = Map<string, number>;

/** Smoothed idf over a document collection: log((1+N)/(1+df)) + 1. */
export function inverseDocumentFrequency(documents: string[][]): Map<string, number> {
  const documentFrequency = new Map<string, number>();
  for (const tokens of documents) {
    for (const term of new Set(tokens)) {
      documentFrequency.set(term, (documentFrequency.get(term) ?? 0) + 1);
    }
  }
  const idf = new Map<string, number>();
  const n = documents.length;
  for (const [term, df] of documentFrequency) {
    idf.set(term, Math.log((1 + n) / (1 + df)) + 1);
  }
  return idf;
}

export function weightedVector(tokens: string[], idf: Map<string, number>): TermVector {
  const vector = new Map<string, number>();
  for (const term of tokens) {
    vector.set(term, (vector.get(term) ?? 0) + 1);
  }
  for (const [term, count] of vector) {
    vector.set(term, count * (idf.get(term) ?? 1));
  }
  return vector;
}

export function cosine(a: TermVector, b: TermVector): number {
  let dot = 0;
  let normA = 0;
  let normB = 0;
  for (const [term, value] of a) {
    normA += value * value;
    const other = b.get(term);
    if (other !== undefined) dot += value * other;
  }
  for (const value of b.values()) normB += value * value;
  if (normA === 0 || normB === 0) return 0;
  return dot / (Math.sqrt(normA) * Math.sqrt(normB));
}

/** FNV-1a over UTF-16 code units; stable across processes unlike V8 hashes. */
function fnv1a(term: string): number {
  let hash = 0x811c9dc5;
  for (let i = 0; i < term.length; i++) {
    hash ^= term.charCodeAt(i);
    hash = Math.imul(hash, 0x01000193) >>> 0;
  }
  return hash;
}

export function hashedEmbedding(tokens: string[], idf: Map<string, number>): number[] {
  const embedding = new Array<number>(EMBED_DIMENSIONS).fill(0);
  for (const [term, value] of weightedVector(tokens, idf)) {
    embedding[fnv1a(term) % EMBED_DIMENSIONS] += value;
  }
  return embedding;
}

export interface SchemaTable {
  name: string;
  columns: string[];
}

export interface ScoreMaps {
  tables: Record<string, number>;
  columns: Record<string, Record<string, number>>;
}

/**
 * Cosine between the question and every element name. The idf collection
 * is the question plus all element names of the request.
 */
export function scoreElements(question: string, tables: SchemaTable[]): ScoreMaps {
  const questionTokens = tokenize(question);
  const elementDocs: string[][] = [];
  for (const table of tables) {
    elementDocs.push(tokenize(table.name));
    for (const column of table.columns) elementDocs.push(tokenize(column));
  }
  const idf = inverseDocumentFrequency([questionTokens, ...elementDocs]);
  const questionVector = weightedVector(questionTokens, idf);

  const result: ScoreMaps = { tables: {}, columns: {} };
  for (const table of tables) {
    result.tables[table.name] = cosine(questionVector, weightedVector(tokenize(table.name), idf));
    result.columns[table.name] = {};
    for (const column of table.columns) {
      result.columns[table.name][column] = cosine(
        questionVector,
        weightedVector(tokenize(column), idf)
      );
    }
  }
  return result;
}

export const BINARY_THRESHOLD = 0.5;

export function thresholdScores(scores: ScoreMaps): ScoreMaps {
  const binary: ScoreMaps = { tables: {}, columns: {} };
  for (const [name, value] of Object.entries(scores.tables)) {
    binary.tables[name] = value >= BINARY_THRESHOLD ? 1 : 0;
  }
  for (const [table, columns] of Object.entries(scores.columns)) {
    binary.columns[table] = {};
    for (const [column, value] of Object.entries(columns)) {
      binary.columns[table][column] = value >= BINARY_THRESHOLD ? 1 : 0;
    }
  }
  return binary;
}

export function embedTexts(texts: string[]): number[][] {
  const documents = texts.map(tokenize);
  const idf = inverseDocumentFrequency(documents);
  return documents.map((tokens) => hashedEmbedding(tokens, idf));
}
