/** JSON shapes of the workbench HTTP API, mirrored field for field. */

export interface ValueChip {
  slot: string;
  start: number;
  exclusive_end: number;
  value: string;
  service: string;
}

export interface TaskTurn {
  index: number;
  speaker: string;
  template: string;
  values: ValueChip[];
}

export interface TaskPayload {
  task_id: string;
  index: number;
  services: string[];
  completed: boolean;
  turns: TaskTurn[];
  paraphrases?: string[];
}

export interface NextTaskResponse {
  done: boolean;
  task: TaskPayload | null;
}

export interface SpanDict {
  slot: string;
  start: number;
  exclusive_end: number;
  value: string;
}

export interface MissingValue {
  slot: string;
  value: string;
}

export interface TurnVerdict {
  accepted: boolean;
  spans: SpanDict[];
  missing: MissingValue[];
}

export interface ValidationResponse {
  task_id: string;
  results: TurnVerdict[];
  all_accepted: boolean;
}

export interface SubmitOk {
  accepted: true;
  task_id: string;
  stored: string;
}

export interface Progress {
  total: number;
  completed: number;
  remaining: number;
  completed_ids: string[];
}
