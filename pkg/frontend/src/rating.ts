/** Rating widget state: optimistic, idempotent, client-validated.
 *
 * Out-of-range scores never reach the network; a click while a request
 * is in flight is ignored, so a double-click stores exactly one rating.
 */

import type { RatingAck } from "./types.js";

export type RatingState =
  | { kind: "idle"; storedScore?: number }
  | { kind: "pending"; score: number }
  | { kind: "stored"; score: number; pendingFeedback: number }
  | { kind: "error"; message: string; storedScore?: number };

export type SubmitFn = (score: number, timestamp: string) => Promise<RatingAck>;

export function validScore(score: number): boolean {
  return Number.isInteger(score) && score >= 1 && score <= 5;
}

export class RatingController {
  state: RatingState;

  constructor(
    private readonly submit: SubmitFn,
    storedScore?: number,
    private readonly clock: () => string = () => new Date().toISOString(),
  ) {
    this.state = { kind: "idle", storedScore };
  }

  /** Returns the resulting state; resolves without a request when the
   * score is invalid or a submission is already in flight. */
  async rate(score: number): Promise<RatingState> {
    if (this.state.kind === "pending") {
      return this.state;
    }
    if (!validScore(score)) {
      this.state = { kind: "error", message: `score ${score} outside 1..5`, storedScore: this.storedScore() };
      return this.state;
    }
    this.state = { kind: "pending", score };
    try {
      const ack = await this.submit(score, this.clock());
      this.state = { kind: "stored", score: ack.score, pendingFeedback: ack.pending_feedback };
    } catch (error) {
      this.state = {
        kind: "error",
        message: error instanceof Error ? error.message : String(error),
        storedScore: undefined,
      };
    }
    return this.state;
  }

  storedScore(): number | undefined {
    if (this.state.kind === "stored") return this.state.score;
    if (this.state.kind === "idle") return this.state.storedScore;
    if (this.state.kind === "error") return this.state.storedScore;
    return undefined;
  }
}
