import express, { Express, NextFunction, Request, Response } from "express";
import { z } from "zod";

import { embedTexts, scoreElements, thresholdScores } from "./scoring";

export interface ServiceConfig {
  host: string;
  port: number;
  model: "bagofwords";
  maxPayloadBytes: number;
}

export const DEFAULT_CONFIG: ServiceConfig = {
  host: "127.0.0.1",
  port: 8787,
  model: "bagofwords",
  maxPayloadBytes: 1_048_576,
};

export function validateConfig(config: ServiceConfig): void {
  if (!Number.isInteger(config.port) || config.port < 0 || config.port > 65535) {
    throw new Error(`port out of range: ${config.port}`);
  }
  if (config.maxPayloadBytes <= 0) {
    throw new Error("maxPayloadBytes must be positive");
  }
}

const scoreRequestSchema = z.object({
  question: z.string(),
  db_id: z.string(),
  tables: z.array(
    z.object({
      name: z.string(),
      columns: z.array(z.string()),
    })
  ),
});

const embedRequestSchema = z.object({
  texts: z.array(z.string()),
});

export function buildApp(config: ServiceConfig = DEFAULT_CONFIG): Express {
  validateConfig(config);
  const app = express();
  app.use(express.json({ limit: config.maxPayloadBytes }));

  app.get("/healthz", (_req, res) => {
    res.status(200).json({ status: "ok", model: config.model });
  });

  app.post("/score_prob", (req, res) => {
    const parsed = scoreRequestSchema.safeParse(req.body);
    if (!parsed.success) {
      res.status(400).json({ error: parsed.error.issues[0]?.message ?? "malformed request" });
      return;
    }
    res.json(scoreElements(parsed.data.question, parsed.data.tables));
  });

  app.post("/score_binary", (req, res) => {
    const parsed = scoreRequestSchema.safeParse(req.body);
    if (!parsed.success) {
      res.status(400).json({ error: parsed.error.issues[0]?.message ?? "malformed request" });
      return;
    }
    res.json(thresholdScores(scoreElements(parsed.data.question, parsed.data.tables)));
  });

  app.post("/embed", (req, res) => {
    const parsed = embedRequestSchema.safeParse(req.body);
    if (!parsed.success) {
      res.status(400).json({ error: parsed.error.issues[0]?.message ?? "malformed request" });
      return;
    }
    res.json({ vectors: embedTexts(parsed.data.texts) });
  });

  // body-parser errors: oversize payloads answer 413, bad JSON answers 400
  app.use((err: any, _req: Request, res: Response, next: NextFunction) => {
    if (err?.type === "entity.too.large") {
      res.status(413).json({ error: "payload too large" });
      return;
    }
    if (err?.type === "entity.parse.failed") {
      res.status(400).json({ error: "malformed JSON" });
      return;
    }
    next(err);
  });

  return app;
}
