/**
 * Push-to-talk state machine: idle -> listening -> thinking -> idle.
 *
 * The space bar opens the mic (mic-on earcon) and closes it again (mic-off
 * earcon). A final recognition result closes the mic itself and submits, so
 * users who stop talking are not forced to press space a second time; a
 * space press before any result cancels back to idle. While a request is in
 * flight the state is "thinking" and space is ignored, which keeps the
 * single user/agent turn cycle intact.
 *
 * A text input fallback is always reachable via submitText; when the
 * recognition API is missing it becomes the primary path and the first
 * space press announces that instead of silently doing nothing.
 */

import type { EarconPlayer } from "./earcons.js";
import type { RecognitionHandle, RecognitionPort } from "./speech.js";

export type MicState = "idle" | "listening" | "thinking";

export interface MicDeps {
  earcons: EarconPlayer;
  recognition: RecognitionPort | null;
  /** Submit one utterance to the engine; settle = response handled. */
  postUtterance: (text: string) => Promise<unknown>;
  /** Surface a notice both visibly and spoken. */
  notify?: (message: string) => void;
}

export const RECOGNITION_UNAVAILABLE_NOTICE =
  "Speech recognition is unavailable in this browser. Type your question in the text box instead.";

export class MicController {
  state: MicState = "idle";
  fallbackVisible: boolean;
  private handle: RecognitionHandle | null = null;

  constructor(private readonly deps: MicDeps) {
    this.fallbackVisible = deps.recognition === null;
  }

  onSpaceBar(): void {
    if (this.state === "listening") {
      // Cancel: close the mic without submitting.
      this.deps.earcons.play("mic_off");
      this.closeRecognition();
      this.state = "idle";
      return;
    }
    if (this.state !== "idle") return; // thinking: space is ignored
    if (!this.deps.recognition) {
      this.fallbackVisible = true;
      this.deps.notify?.(RECOGNITION_UNAVAILABLE_NOTICE);
      return;
    }
    this.state = "listening";
    this.deps.earcons.play("mic_on");
    this.handle = this.deps.recognition.start(
      (text) => this.onFinalResult(text),
      (err) => this.onRecognitionError(err),
    );
  }

  /** Text fallback; follows the same thinking cycle as voice. */
  submitText(text: string): boolean {
    if (this.state === "thinking" || !text.trim()) return false;
    if (this.state === "listening") {
      this.deps.earcons.play("mic_off");
      this.closeRecognition();
    }
    this.submit(text.trim());
    return true;
  }

  private onFinalResult(text: string): void {
    if (this.state !== "listening") return; // stale result after cancel
    this.deps.earcons.play("mic_off");
    this.closeRecognition();
    if (!text.trim()) {
      this.state = "idle";
      return;
    }
    this.submit(text.trim());
  }

  private onRecognitionError(_err: unknown): void {
    if (this.state !== "listening") return;
    this.deps.earcons.play("mic_off");
    this.closeRecognition();
    this.state = "idle";
    this.fallbackVisible = true;
    this.deps.notify?.(RECOGNITION_UNAVAILABLE_NOTICE);
  }

  private submit(text: string): void {
    this.state = "thinking";
    this.deps.postUtterance(text).then(
      () => this.settle(),
      () => this.settle(),
    );
  }

  private settle(): void {
    if (this.state === "thinking") this.state = "idle";
  }

  private closeRecognition(): void {
    this.handle?.stop();
    this.handle = null;
  }
}
