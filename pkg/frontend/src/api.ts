/**
 * Typed client for the annotation service API. The UI talks exclusively to
 * these endpoints; the server is the source of truth for session state.
 */

export interface GradingItem {
  question_id: string;
  subject_area: string;
  question: string;
  label: string;
  answer: string;
  rubric: string;
}

export interface GraderProgress {
  grader_id: string;
  graded: number;
  total: number;
}

export interface ProgressReport {
  total: number;
  graders: GraderProgress[];
}

export interface StoredGrade {
  question_id: string;
  grader_id: string;
  score: number;
  reason: string;
  confidence: number | null;
  raw_response: string;
  warnings: string[];
}

export interface ApiError {
  code: string;
  message: string;
}

export type SubmitResult =
  | { ok: true; grade: StoredGrade }
  | { ok: false; status: number; error: ApiError }
  | { ok: false; status: 0; error: ApiError }; // network failure

async function errorBody(response: Response): Promise<ApiError> {
  try {
    const body = (await response.json()) as ApiError;
    if (body && typeof body.message === "string") {
      return body;
    }
  } catch {
    // fall through to the generic error
  }
  return { code: "http_error", message: `HTTP ${response.status}` };
}

/** Next ungraded item for the grader, or null when the session is complete. */
export async function fetchNextItem(grader: string): Promise<GradingItem | null> {
  const response = await fetch(`/api/next?grader=${encodeURIComponent(grader)}`);
  if (response.status === 204) {
    return null;
  }
  if (!response.ok) {
    const error = await errorBody(response);
    throw new Error(error.message);
  }
  return (await response.json()) as GradingItem;
}

export async function submitGrade(
  grader: string,
  questionId: string,
  score: number,
  reason: string,
): Promise<SubmitResult> {
  let response: Response;
  try {
    response = await fetch("/api/grades", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({
        grader_id: grader,
        question_id: questionId,
        score,
        reason,
      }),
    });
  } catch {
    return {
      ok: false,
      status: 0,
      error: { code: "network", message: "Network failure; grade not saved. Retry." },
    };
  }
  if (response.status === 201) {
    return { ok: true, grade: (await response.json()) as StoredGrade };
  }
  return { ok: false, status: response.status, error: await errorBody(response) };
}

export async function fetchProgress(): Promise<ProgressReport> {
  const response = await fetch("/api/progress");
  if (!response.ok) {
    throw new Error(`progress failed: HTTP ${response.status}`);
  }
  return (await response.json()) as ProgressReport;
}
