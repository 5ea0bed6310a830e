/** Prompt assembly for the text encoder. */

export const DEFAULT_TEMPLATE = "a video of a person doing <CLS>";
export const PLACEHOLDER = "<CLS>";

export class PromptError extends Error {}

export function validateTemplate(template: string): void {
  const count = template.split(PLACEHOLDER).length - 1;
  if (count !== 1) {
    throw new PromptError(
      `template must contain exactly one ${PLACEHOLDER} placeholder, found ${count}`,
    );
  }
}

export function assemblePrompt(template: string, className: string): string {
  validateTemplate(template);
  if (className.trim().length === 0) {
    throw new PromptError("class name must be non-empty");
  }
  return template.replace(PLACEHOLDER, className);
}
