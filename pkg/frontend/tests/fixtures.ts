import type { TaskPayload } from "../src/types.js";

/** Three-turn dialogue with highlighted values on both user turns. */
export function gateTask(): TaskPayload {
  return {
    task_id: "gate-0001",
    index: 0,
    services: ["Restaurants_1"],
    completed: false,
    turns: [
      {
        index: 0,
        speaker: "USER",
        template: "I want dinner in Oakland at 7 pm",
        values: [
          {
            slot: "city",
            start: 17,
            exclusive_end: 24,
            value: "Oakland",
            service: "Restaurants_1",
          },
          {
            slot: "time",
            start: 28,
            exclusive_end: 32,
            value: "7 pm",
            service: "Restaurants_1",
          },
        ],
      },
      { index: 1, speaker: "SYSTEM", template: "How many people?", values: [] },
      {
        index: 2,
        speaker: "USER",
        template: "Two of us",
        values: [
          {
            slot: "party_size",
            start: 0,
            exclusive_end: 3,
            value: "Two",
            service: "Restaurants_1",
          },
        ],
      },
    ],
  };
}

/** Minimal second task so queue advancement is observable. */
export function followupTask(): TaskPayload {
  return {
    task_id: "gate-0002",
    index: 1,
    services: ["RideSharing_1"],
    completed: false,
    turns: [
      {
        index: 0,
        speaker: "USER",
        template: "Get me a cab to the airport",
        values: [
          {
            slot: "destination",
            start: 16,
            exclusive_end: 27,
            value: "the airport",
            service: "RideSharing_1",
          },
        ],
      },
      { index: 1, speaker: "SYSTEM", template: "On its way.", values: [] },
    ],
  };
}
