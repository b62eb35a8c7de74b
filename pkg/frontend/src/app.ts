import { ApiClient } from "./api.js";
import { JobStream, type EventSourceFactory, nativeEventSource } from "./progress.js";
import { MicRecorder } from "./recorder.js";
import { renderApp } from "./render.js";
import { slideAt } from "./slideIndicator.js";
import { initialState, type Actions, type AppState } from "./state.js";
import { applyEvent, emptyProgress } from "./steps.js";

/**
 * Single-page controller: owns the state, re-renders on every change, and
 * advances stages only on server confirmation (no optimistic transitions).
 */
export class App implements Actions {
  state: AppState = initialState();
  private stream: JobStream | null = null;
  private voiceRecorder = new MicRecorder();
  private practiceRecorder = new MicRecorder();

  constructor(
    private root: HTMLElement,
    private api: ApiClient = new ApiClient(),
    private eventSourceFactory: EventSourceFactory = nativeEventSource
  ) {}

  async boot(): Promise<void> {
    this.state.session = await this.api.createSession("");
    this.render();
  }

  render(): void {
    this.root.replaceChildren(renderApp(this.state, this));
  }

  private async refreshSession(): Promise<void> {
    if (!this.state.session) return;
    this.state.session = await this.api.getSession(this.state.session.id);
  }

  // ---- setup actions ------------------------------------------------------

  async uploadDeck(file: File): Promise<void> {
    if (!this.state.session) return;
    try {
      this.state.deck = await this.api.uploadDeck(this.state.session.id, file, file.name);
      this.state.setupError = null;
    } catch (e) {
      this.state.deck = null;
      this.state.setupError = (e as Error).message;
    }
    this.render();
  }

  async uploadVoice(file: Blob, name: string): Promise<void> {
    if (!this.state.session) return;
    try {
      this.state.voice = await this.api.uploadVoice(this.state.session.id, file, name);
      this.state.setupError = null;
    } catch (e) {
      this.state.voice = null;
      this.state.setupError = (e as Error).message;
    }
    this.render();
  }

  async setPrompt(text: string): Promise<void> {
    this.state.prompt = text;
    if (this.state.session) {
      this.state.session = await this.api.setPrompt(this.state.session.id, text);
    }
    this.render();
  }

  async startVoiceRecording(): Promise<void> {
    await this.voiceRecorder.start();
    this.state.recording = true;
    this.render();
  }

  async stopVoiceRecording(): Promise<void> {
    const blob = await this.voiceRecorder.stop();
    this.state.recording = false;
    await this.uploadVoice(blob, "sample.webm");
  }

  async generate(): Promise<void> {
    if (!this.state.session) return;
    try {
      const job = await this.api.startGeneration(this.state.session.id);
      await this.refreshSession(); // stage flips only once the server says so
      this.state.progress = emptyProgress();
      this.subscribe(job.id);
    } catch (e) {
      this.state.setupError = (e as Error).message;
    }
    this.render();
  }

  private subscribe(jobId: string): void {
    this.stream?.close();
    this.stream = new JobStream(
      this.api.jobEventsUrl(jobId),
      {
        onEvent: (event) => {
          this.state.progress = applyEvent(this.state.progress, event);
          this.render();
        },
        onEnd: () => void this.onJobEnd(),
      },
      this.eventSourceFactory
    );
  }

  private async onJobEnd(): Promise<void> {
    await this.refreshSession();
    if (this.state.session?.stage === "coaching") {
      await this.loadCoachingData();
    }
    this.render();
  }

  private async loadCoachingData(): Promise<void> {
    if (!this.state.session) return;
    const id = this.state.session.id;
    this.state.manifest = await this.api.getManifest(id);
    this.state.script = (await this.api.getScript(id)).segments;
    this.state.chat = (await this.api.getChatHistory(id)).messages;
    this.state.currentSlide = this.state.manifest.entries[0]?.slide_index ?? 1;
  }

  async returnToSetup(): Promise<void> {
    this.stream?.close();
    this.stream = null;
    await this.refreshSession(); // server reverts the stage on failure
    this.state.progress = emptyProgress();
    this.render();
  }

  // ---- coaching actions ---------------------------------------------------

  seek(tMs: number): void {
    if (!this.state.manifest) return;
    const slide = slideAt(this.state.manifest, tMs);
    if (slide !== this.state.currentSlide) {
      this.state.currentSlide = slide;
      this.render();
    }
  }

  async startPracticeRecording(): Promise<void> {
    await this.practiceRecorder.start();
    this.state.practiceRecording = true;
    this.render();
  }

  async stopPracticeRecording(): Promise<void> {
    const blob = await this.practiceRecorder.stop();
    this.state.practiceRecording = false;
    await this.submitPractice(blob, "practice.webm");
  }

  async uploadPractice(file: File): Promise<void> {
    await this.submitPractice(file, file.name);
  }

  private async submitPractice(blob: Blob, name: string): Promise<void> {
    if (!this.state.session) return;
    const practice = await this.api.uploadPractice(this.state.session.id, blob, name);
    this.state.practices = [...this.state.practices, practice];
    this.render();
  }

  async analyze(practiceId: string): Promise<void> {
    this.state.analyzing.add(practiceId);
    this.render();
    try {
      const job = await this.api.analyzePractice(practiceId);
      await new Promise<void>((resolve) => {
        new JobStream(
          this.api.jobEventsUrl(job.id),
          { onEvent: () => {}, onEnd: () => resolve() },
          this.eventSourceFactory
        );
      });
      this.state.reports.set(practiceId, await this.api.getReport(practiceId));
    } finally {
      this.state.analyzing.delete(practiceId);
    }
    this.render();
  }

  async sendChat(text: string): Promise<void> {
    if (!this.state.session) return;
    this.state.chat = [
      ...this.state.chat,
      { role: "user", content: text, timestamp: new Date().toISOString() },
    ];
    this.state.chatPending = true;
    this.render();
    try {
      const reply = await this.api.sendChat(this.state.session.id, text);
      this.state.chat = [...this.state.chat, reply];
    } finally {
      this.state.chatPending = false;
    }
    this.render();
  }
}
