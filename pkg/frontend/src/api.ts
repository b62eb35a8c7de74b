import type {
  AnalysisReport,
  ChatMessage,
  DeckUploadResult,
  Manifest,
  PracticeRecording,
  ScriptSegment,
  SessionSummary,
  VoiceUploadResult,
} from "./types.js";

async function asJson<T>(resp: Response): Promise<T> {
  if (!resp.ok) {
    let detail = resp.statusText;
    try {
      const body = await resp.json();
      detail = body.message || body.detail || detail;
    } catch {
      // non-JSON error body, keep the status text
    }
    throw new Error(detail);
  }
  return resp.json() as Promise<T>;
}

function upload(url: string, file: Blob, filename: string): Promise<Response> {
  const form = new FormData();
  form.append("file", file, filename);
  return fetch(url, { method: "POST", body: form });
}

export class ApiClient {
  constructor(private base = "") {}

  createSession(userPrompt: string): Promise<SessionSummary> {
    return fetch(`${this.base}/api/sessions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ user_prompt: userPrompt }),
    }).then((r) => asJson<SessionSummary>(r));
  }

  getSession(id: string): Promise<SessionSummary> {
    return fetch(`${this.base}/api/sessions/${id}`).then((r) =>
      asJson<SessionSummary>(r)
    );
  }

  setPrompt(id: string, userPrompt: string): Promise<SessionSummary> {
    return fetch(`${this.base}/api/sessions/${id}/prompt`, {
      method: "PUT",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ user_prompt: userPrompt }),
    }).then((r) => asJson<SessionSummary>(r));
  }

  uploadDeck(id: string, file: Blob, name: string): Promise<DeckUploadResult> {
    return upload(`${this.base}/api/sessions/${id}/deck`, file, name).then((r) =>
      asJson<DeckUploadResult>(r)
    );
  }

  uploadVoice(id: string, file: Blob, name: string): Promise<VoiceUploadResult> {
    return upload(`${this.base}/api/sessions/${id}/voice`, file, name).then((r) =>
      asJson<VoiceUploadResult>(r)
    );
  }

  startGeneration(id: string): Promise<{ id: string }> {
    return fetch(`${this.base}/api/sessions/${id}/generate`, {
      method: "POST",
    }).then((r) => asJson<{ id: string }>(r));
  }

  jobEventsUrl(jobId: string): string {
    return `${this.base}/api/jobs/${jobId}/events`;
  }

  exemplarUrl(id: string): string {
    return `${this.base}/api/sessions/${id}/exemplar`;
  }

  getManifest(id: string): Promise<Manifest> {
    return fetch(`${this.base}/api/sessions/${id}/exemplar/manifest`).then((r) =>
      asJson<Manifest>(r)
    );
  }

  getScript(id: string): Promise<{ segments: ScriptSegment[] }> {
    return fetch(
      `${this.base}/api/sessions/${id}/exemplar/script?format=json`
    ).then((r) => asJson<{ segments: ScriptSegment[] }>(r));
  }

  uploadPractice(id: string, file: Blob, name: string): Promise<PracticeRecording> {
    return upload(`${this.base}/api/sessions/${id}/practice`, file, name).then(
      (r) => asJson<PracticeRecording>(r)
    );
  }

  analyzePractice(practiceId: string): Promise<{ id: string }> {
    return fetch(`${this.base}/api/practice/${practiceId}/analyze`, {
      method: "POST",
    }).then((r) => asJson<{ id: string }>(r));
  }

  getReport(practiceId: string): Promise<AnalysisReport> {
    return fetch(`${this.base}/api/practice/${practiceId}/report`).then((r) =>
      asJson<AnalysisReport>(r)
    );
  }

  sendChat(id: string, message: string): Promise<ChatMessage> {
    return fetch(`${this.base}/api/sessions/${id}/chat`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ message }),
    }).then((r) => asJson<ChatMessage>(r));
  }

  getChatHistory(id: string): Promise<{ messages: ChatMessage[] }> {
    return fetch(`${this.base}/api/sessions/${id}/chat`).then((r) =>
      asJson<{ messages: ChatMessage[] }>(r)
    );
  }
}
